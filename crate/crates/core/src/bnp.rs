//! Infinite random-intercepts mixture of normal regressions.
//!
//! f(y | x) = Σ_j ω_j(xᵀβ_ω, σ_ω) · n(y | μ₀ⱼ + xᵀβ, φσ̂²), j ∈ ℤ, with cumulative-probit weights
//! ω_j = Φ((j − xᵀβ_ω)/σ_ω) − Φ((j − 1 − xᵀβ_ω)/σ_ω).
//!
//! The sampler augments each report with a component label d_i and a latent
//! z_i ~ n(x_iᵀβ_ω, σ_ω²) with d_i = ⌈z_i⌉, which makes (β_ω, σ_ω) conjugate. Intercepts are
//! instantiated lazily from their n(0, σ₀²) prior and only occupied ones are kept between sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::MetaDataset;
use crate::error::{Error, Result};
use crate::math::{gaussian_from_precision_with_noise, ln_normal_pdf, std_normal_interval};
use crate::model::{CovariateMode, McmcConfig, ModelKind, ModelSpec, ScalePrior};
use crate::normal::{model_design, update_scale};
use crate::posterior::{BnpDraw, Draw, PosteriorDraws, SamplerStats};
use crate::regression::{draw_beta, draw_gamma, CoefficientPrior};
use crate::sampling::{gamma_rate, std_normal, truncated_normal};

/// Mixture weights ω_j for j in [⌊η − Wσ_ω⌋, ⌈η + Wσ_ω⌉].
///
/// The omitted tail mass is at most 2Φ(−W).
pub fn mixture_weights(eta: f64, sigma_omega: f64, window: f64) -> Vec<(i64, f64)> {
    let (lo, hi) = window_range(eta, sigma_omega, window);
    (lo..=hi).map(|j| (j, weight(j, eta, sigma_omega))).collect()
}

/// ω_j(η, σ_ω).
pub fn weight(j: i64, eta: f64, sigma_omega: f64) -> f64 {
    std_normal_interval((j as f64 - 1.0 - eta) / sigma_omega, (j as f64 - eta) / sigma_omega)
}

fn window_range(eta: f64, sigma_omega: f64, window: f64) -> (i64, i64) {
    ((eta - window * sigma_omega).floor() as i64, (eta + window * sigma_omega).ceil() as i64)
}

/// All parameters and augmentation variables of the mixture model.
#[derive(Debug, Clone, PartialEq)]
pub struct BnpState {
    pub beta: Vec<f64>,
    pub gamma: Vec<bool>,
    /// Instantiated intercepts μ₀ⱼ.
    pub mu: BTreeMap<i64, f64>,
    pub phi: f64,
    pub sigma0_sq: f64,
    pub beta_omega: Vec<f64>,
    pub sigma_omega: f64,
    /// Component label d_i of each report.
    pub alloc: Vec<i64>,
    /// Latent probit variable z_i ∈ (d_i − 1, d_i].
    pub z: Vec<f64>,
}

impl BnpState {
    /// Component labels in use and how many reports each holds.
    pub fn occupancy(&self) -> BTreeMap<i64, usize> {
        let mut counts = BTreeMap::new();
        for &d in &self.alloc {
            *counts.entry(d).or_insert(0) += 1;
        }
        counts
    }
}

/// Conjugate normal-gamma draw of (β_ω, σ_ω) for the probit regression z ~ n(Xβ_ω, σ_ω²I)
/// under β_ω | σ_ω² ~ n(0, σ_ω²·scale·I) and σ_ω⁻² ~ ga(shape, rate).
///
/// Works with zero rows, in which case it samples the prior.
pub fn draw_weight_regression<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    z: &[f64],
    scale: f64,
    shape: f64,
    rate: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let k = x.ncols();
    let mut a = x.transpose() * x;
    for j in 0..k {
        a[(j, j)] += 1.0 / scale;
    }
    let zv = DVector::from_column_slice(z);
    let xtz = x.transpose() * &zv;
    let chol = a.clone().cholesky().ok_or_else(|| Error::Numerical {
        message: "weight regression: XᵀX + I/c is not positive definite".into(),
        condition_number: crate::math::condition_number(&a),
    })?;
    let m = chol.solve(&xtz);
    let resid = (zv.dot(&zv) - m.dot(&xtz)).max(0.0);
    let tau = gamma_rate(shape + 0.5 * z.len() as f64, rate + 0.5 * resid, rng);
    let eps = DVector::from_fn(k, |_, _| std_normal(rng) / tau.sqrt());
    let beta = gaussian_from_precision_with_noise(a, &xtz, &eps, "weight regression")?;
    Ok((beta.iter().copied().collect(), 1.0 / tau.sqrt()))
}

/// Data-augmented Gibbs sampler for the mixture model.
pub struct BnpSampler {
    mode: CovariateMode,
    x: DMatrix<f64>,
    y: Vec<f64>,
    var: Vec<f64>,
    coef: CoefficientPrior,
    sigma0_prior: ScalePrior,
    a_phi: f64,
    omega_scale: f64,
    omega_shape: f64,
    omega_rate: f64,
    window: f64,
    state: BnpState,
    probit_tail_warnings: usize,
    window_widenings: usize,
}

impl BnpSampler {
    pub fn new(spec: &ModelSpec, d: &MetaDataset, window: f64) -> Result<Self> {
        spec.validate()?;
        if spec.model != ModelKind::Bnp {
            return Err(Error::Spec("the mixture sampler only fits the mixture model".into()));
        }
        if !(window >= 1.0) {
            return Err(Error::Spec(format!("truncation window must be at least 1, got {window}")));
        }
        let (x, _) = model_design(d, spec.covariates);
        let p = x.ncols() - 1;
        let y = d.y();
        let n = y.len();
        let spread = if n > 1 { crate::math::sample_variance(&y) } else { 1.0 };
        let b0 = spec.priors.b0;
        let mut beta = vec![0.0; p + 1];
        beta[0] = crate::math::mean(&y);
        let mut beta_omega = vec![0.0; p + 1];
        beta_omega[0] = 0.5;
        let state = BnpState {
            beta,
            gamma: if spec.covariates == CovariateMode::SpikeSlab { vec![true; p] } else { Vec::new() },
            mu: BTreeMap::from([(1, 0.0)]),
            phi: 1.0,
            sigma0_sq: (0.5 * spread).clamp(1e-4, 0.25 * b0 * b0),
            beta_omega,
            sigma_omega: 0.5,
            alloc: vec![1; n],
            z: vec![0.5; n],
        };
        Ok(Self {
            mode: spec.covariates,
            x,
            y,
            var: d.var(),
            coef: CoefficientPrior::new(&spec.priors, spec.covariates),
            sigma0_prior: spec.priors.sigma0_prior(),
            a_phi: spec.priors.a_phi,
            omega_scale: spec.priors.omega_scale,
            omega_shape: spec.priors.omega_shape,
            omega_rate: spec.priors.omega_rate,
            window,
            state,
            probit_tail_warnings: 0,
            window_widenings: 0,
        })
    }

    pub fn state(&self) -> &BnpState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut BnpState {
        &mut self.state
    }

    pub fn set_response(&mut self, y: Vec<f64>) {
        assert_eq!(y.len(), self.y.len());
        self.y = y;
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn probit_tail_warnings(&self) -> usize {
        self.probit_tail_warnings
    }

    pub fn window_widenings(&self) -> usize {
        self.window_widenings
    }

    fn eta(&self, i: usize) -> f64 {
        self.x.row(i).iter().zip(&self.state.beta_omega).map(|(a, b)| a * b).sum()
    }

    fn fitted(&self, i: usize) -> f64 {
        self.x.row(i).iter().zip(&self.state.beta).map(|(a, b)| a * b).sum()
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.update_allocations(rng)?;
        self.update_latent_probit(rng);
        self.update_weight_regression(rng)?;
        self.update_intercepts(rng);
        self.recenter(rng);
        self.update_beta_gamma(rng)?;
        self.update_phi(rng);
        self.update_sigma0(rng);
        Ok(())
    }

    /// Draws each d_i from P(d_i = j) ∝ ω_j·n(y_i | μ₀ⱼ + x_iᵀβ, φσ̂_i²) over its truncation window.
    pub fn update_allocations<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let sd0 = self.state.sigma0_sq.sqrt();
        let mut logp: Vec<f64> = Vec::new();
        for i in 0..self.y.len() {
            let eta = self.eta(i);
            let resid = self.y[i] - self.fitted(i);
            let v = self.state.phi * self.var[i];
            let mut window = self.window;
            let (lo, best) = loop {
                let (lo, hi) = window_range(eta, self.state.sigma_omega, window);
                logp.clear();
                for j in lo..=hi {
                    let mu = *self.state.mu.entry(j).or_insert_with(|| sd0 * std_normal(rng));
                    logp.push(weight(j, eta, self.state.sigma_omega).ln() + ln_normal_pdf(resid, mu, v));
                }
                let best = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if best.is_finite() {
                    break (lo, best);
                }
                if window > self.window {
                    return Err(Error::Divergence {
                        sweep: 0,
                        message: format!(
                            "allocation weights of report {} are all zero (η = {eta}, σ_ω = {})",
                            i + 1,
                            self.state.sigma_omega
                        ),
                    });
                }
                window *= 2.0;
                self.window_widenings += 1;
            };
            let total: f64 = logp.iter().map(|l| (l - best).exp()).sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = logp.len() - 1;
            for (k, l) in logp.iter().enumerate() {
                u -= (l - best).exp();
                if u <= 0.0 {
                    pick = k;
                    break;
                }
            }
            self.state.alloc[i] = lo + pick as i64;
        }
        Ok(())
    }

    /// z_i ~ n(x_iᵀβ_ω, σ_ω²) truncated to (d_i − 1, d_i].
    pub fn update_latent_probit<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = self.state.sigma_omega;
        for i in 0..self.y.len() {
            let eta = self.eta(i);
            let d = self.state.alloc[i] as f64;
            if (d - 1.0 - eta) / s > 8.0 || (d - eta) / s < -8.0 {
                self.probit_tail_warnings += 1;
            }
            self.state.z[i] = truncated_normal(eta, s, d - 1.0, d, rng);
        }
    }

    pub fn update_weight_regression<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (b, s) =
            draw_weight_regression(&self.x, &self.state.z, self.omega_scale, self.omega_shape, self.omega_rate, rng)?;
        self.state.beta_omega = b;
        self.state.sigma_omega = s;
        Ok(())
    }

    /// Occupied intercepts from their conjugate normal conditionals; unoccupied ones are dropped
    /// and will be redrawn from the prior when next needed.
    pub fn update_intercepts<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut acc: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for i in 0..self.y.len() {
            let w = 1.0 / (self.state.phi * self.var[i]);
            let e = acc.entry(self.state.alloc[i]).or_insert((0.0, 0.0));
            e.0 += w;
            e.1 += w * (self.y[i] - self.fitted(i));
        }
        let prior_prec = 1.0 / self.state.sigma0_sq;
        self.state.mu = acc
            .into_iter()
            .map(|(j, (w, lin))| {
                let prec = prior_prec + w;
                (j, lin / prec + std_normal(rng) / prec.sqrt())
            })
            .collect();
    }

    /// Joint shift β₀ + c, μ₀ⱼ − c of the overall intercept against the occupied intercepts.
    ///
    /// The likelihood is invariant under the shift, so c is drawn from the normal implied by the
    /// priors alone. This removes the slow random walk of β₀ along that ridge.
    pub fn recenter<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let occupied = self.state.mu.len() as f64;
        let v = self.coef.v_intercept;
        let prior_b0 = if v.is_finite() { 1.0 / v } else { 0.0 };
        let prec = prior_b0 + occupied / self.state.sigma0_sq;
        let lin = self.state.mu.values().sum::<f64>() / self.state.sigma0_sq - self.state.beta[0] * prior_b0;
        let c = lin / prec + std_normal(rng) / prec.sqrt();
        self.state.beta[0] += c;
        for m in self.state.mu.values_mut() {
            *m -= c;
        }
    }

    /// β with the φ-scaled slope prior, then the spike-and-slab indicators.
    pub fn update_beta_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.y.len();
        let target: Vec<f64> = (0..n).map(|i| self.y[i] - self.state.mu[&self.state.alloc[i]]).collect();
        let weight: Vec<f64> = self.var.iter().map(|v| 1.0 / (self.state.phi * v)).collect();
        let p = self.x.ncols() - 1;
        let prior_var = self.coef.variances(&self.state.gamma, p, self.state.phi);
        self.state.beta = draw_beta(&self.x, &target, &weight, &prior_var, rng)?.iter().copied().collect();
        if self.mode == CovariateMode::SpikeSlab {
            draw_gamma(&self.state.beta, &mut self.state.gamma, &self.coef, self.state.phi, rng);
        }
        Ok(())
    }

    /// φ⁻¹ from its gamma conditional, including the φ-scaled slope prior terms.
    pub fn update_phi<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.y.len();
        let p = self.x.ncols() - 1;
        let mut rate = 0.5 * self.a_phi;
        for i in 0..n {
            let r = self.y[i] - self.state.mu[&self.state.alloc[i]] - self.fitted(i);
            rate += 0.5 * r * r / self.var[i];
        }
        for k in 0..p {
            let v = self.coef.slope_var(self.state.gamma.get(k).copied().unwrap_or(true));
            rate += 0.5 * self.state.beta[k + 1].powi(2) / v;
        }
        let shape = 0.5 * (self.a_phi + n as f64 + p as f64);
        self.state.phi = 1.0 / gamma_rate(shape, rate, rng);
    }

    /// σ₀ given the occupied intercepts only.
    pub fn update_sigma0<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let ss: f64 = self.state.mu.values().map(|m| m * m).sum();
        let j = self.state.mu.len();
        self.state.sigma0_sq = update_scale(self.state.sigma0_sq, ss, j, self.sigma0_prior, rng);
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> BnpDraw {
        let occupied = self.state.occupancy();
        BnpDraw {
            beta: self.state.beta.clone(),
            gamma: self.state.gamma.clone(),
            phi: self.state.phi,
            sigma0_sq: self.state.sigma0_sq,
            beta_omega: self.state.beta_omega.clone(),
            sigma_omega: self.state.sigma_omega,
            intercepts: occupied.keys().map(|&j| (j, self.state.mu[&j])).collect(),
            fill_seed: rng.random(),
        }
    }

    fn check(&self, sweep: usize) -> Result<()> {
        let s = &self.state;
        let finite = s.beta.iter().chain(&s.beta_omega).chain(s.mu.values()).chain(&s.z).all(|v| v.is_finite())
            && s.phi.is_finite()
            && s.phi > 0.0
            && s.sigma0_sq.is_finite()
            && s.sigma0_sq > 0.0
            && s.sigma_omega.is_finite()
            && s.sigma_omega > 0.0;
        if finite {
            Ok(())
        } else {
            Err(Error::Divergence { sweep, message: format!("non-finite state (last state: {s:?})") })
        }
    }
}

/// Runs one chain of the mixture sampler.
pub fn fit_bnp(spec: &ModelSpec, d: &MetaDataset, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    mcmc.validate()?;
    let started = Instant::now();
    let mut sampler = BnpSampler::new(spec, d, mcmc.window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    let run = |sampler: &mut BnpSampler, rng: &mut ChaCha8Rng, sweep: usize| -> Result<()> {
        sampler.sweep(rng).map_err(|e| match e {
            Error::Divergence { message, .. } => Error::Divergence { sweep, message },
            other => other,
        })?;
        sampler.check(sweep)
    };
    for sweep in 0..mcmc.burn {
        run(&mut sampler, &mut rng, sweep)?;
    }
    let mut draws = Vec::with_capacity(mcmc.keep);
    for k in 0..mcmc.keep * mcmc.thin {
        run(&mut sampler, &mut rng, mcmc.burn + k)?;
        if (k + 1) % mcmc.thin == 0 {
            draws.push(Draw::Bnp(sampler.draw(&mut rng)));
        }
    }
    let (_, names) = model_design(d, spec.covariates);
    Ok(PosteriorDraws {
        spec: spec.clone(),
        mcmc: *mcmc,
        covariate_names: names,
        relatedness_k: None,
        draws,
        stats: SamplerStats {
            acceptance_rate: None,
            probit_tail_warnings: sampler.probit_tail_warnings,
            window_widenings: sampler.window_widenings,
            runtime_secs: started.elapsed().as_secs_f64(),
        },
    })
}
