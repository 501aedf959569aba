//! Normal fixed-effects and two-/three-level random-intercept meta-regressions.
//!
//! y_i = x_iᵀβ + μ₀ᵢ + μ₀₀ₜ + e_i with e_i ~ n(0, σ̂_i²). The random-intercept terms are
//! present per model kind, and the correlated two-level model gives μ₀ the prior
//! n(0, σ₀²I + ψM) where M marks reports from the same study.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{build_relatedness, group_index, Grouping, MetaDataset, RelatednessMode};
use crate::error::{Error, Result};
use crate::math::{gaussian_from_precision_with_noise, LN_SQRT_2PI};
use crate::model::{CovariateMode, McmcConfig, ModelKind, ModelSpec, ScalePrior};
use crate::posterior::{Draw, NormalDraw, PosteriorDraws, SamplerStats};
use crate::regression::{draw_beta, draw_gamma, CoefficientPrior};
use crate::sampling::{gamma_rate, slice_sample, std_normal};

/// Current values of every parameter of a normal model.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalState {
    pub beta: Vec<f64>,
    pub gamma: Vec<bool>,
    /// Level-2 intercepts, one per level-2 group.
    pub mu0: Vec<f64>,
    /// Level-3 intercepts, one per study (three-level model only).
    pub mu00: Vec<f64>,
    pub sigma0_sq: f64,
    pub sigma00_sq: f64,
    pub psi: f64,
}

/// Design matrix (leading column of ones) and the covariate names a model uses.
pub fn model_design(d: &MetaDataset, mode: CovariateMode) -> (DMatrix<f64>, Vec<String>) {
    match mode {
        CovariateMode::None => (DMatrix::from_element(d.n(), 1, 1.0), Vec::new()),
        _ => (d.design_matrix(), d.covariate_names().to_vec()),
    }
}

/// c₀ = {n / Σ σ̂_i⁻²}^{1/2}, the scale of the log-logistic prior on σ₀².
pub fn stevens_taylor_c0(var: &[f64]) -> f64 {
    (var.len() as f64 / var.iter().map(|v| 1.0 / v).sum::<f64>()).sqrt()
}

// Lower limit for log σ in slice updates: keeps the σ^(1−G) kernel proper when every
// intercept is exactly zero.
const LOG_SCALE_FLOOR: f64 = -30.0;

/// One update of a random-intercept variance σ² given `count` intercepts with sum of squares `sum_sq`.
pub(crate) fn update_scale<R: Rng + ?Sized>(
    sigma_sq: f64,
    sum_sq: f64,
    count: usize,
    prior: ScalePrior,
    rng: &mut R,
) -> f64 {
    let g = count as f64;
    match prior {
        ScalePrior::InverseGamma { eps } => 1.0 / gamma_rate(eps + 0.5 * g, eps + 0.5 * sum_sq, rng),
        ScalePrior::Uniform { upper } => {
            // log σ has density ∝ σ^(1−G)·exp(−S/(2σ²)) on (−∞, log b)
            let target = |x: f64| -(g - 1.0) * x - 0.5 * sum_sq * (-2.0 * x).exp();
            let x0 = (0.5 * sigma_sq.ln()).clamp(LOG_SCALE_FLOOR, upper.ln());
            (2.0 * slice_sample(x0, target, 1.0, LOG_SCALE_FLOOR, upper.ln(), 100, rng)).exp()
        }
        ScalePrior::HalfT { scale, df } => {
            let target = |x: f64| {
                let s2 = (2.0 * x).exp();
                -(g - 1.0) * x - 0.5 * sum_sq / s2 - 0.5 * (df + 1.0) * (s2 / (df * scale * scale)).ln_1p()
            };
            let x0 = (0.5 * sigma_sq.ln()).max(LOG_SCALE_FLOOR);
            (2.0 * slice_sample(x0, target, 1.0, LOG_SCALE_FLOOR, f64::INFINITY, 100, rng)).exp()
        }
    }
}

/// Gibbs/Metropolis sampler for one normal model on one dataset.
pub struct NormalSampler {
    kind: ModelKind,
    mode: CovariateMode,
    x: DMatrix<f64>,
    y: Vec<f64>,
    weight: Vec<f64>,
    coef: CoefficientPrior,
    sigma0_prior: ScalePrior,
    sigma00_prior: ScalePrior,
    /// Level-2 group of each report.
    groups: Vec<usize>,
    /// Study of each report (three-level model).
    studies: Vec<usize>,
    n_studies: usize,
    /// Reports of each study, for the correlated model.
    blocks: Vec<Vec<usize>>,
    k: usize,
    c0: f64,
    state: NormalState,
    step: [f64; 2],
    adapting: bool,
    window_accepts: usize,
    window_proposals: usize,
    accepts: usize,
    proposals: usize,
}

impl NormalSampler {
    pub fn new(spec: &ModelSpec, d: &MetaDataset) -> Result<Self> {
        spec.validate()?;
        if spec.model == ModelKind::Bnp {
            return Err(Error::Spec("the mixture model has its own sampler".into()));
        }
        let (x, _) = model_design(d, spec.covariates);
        let p = x.ncols() - 1;
        let y = d.y();
        let var = d.var();
        let (groups, n_groups) = match spec.model {
            ModelKind::Fe => (vec![0; d.n()], 0),
            ModelKind::Re2l => group_index(d, spec.grouping),
            _ => group_index(d, Grouping::ByReport),
        };
        let (studies, n_studies) = match spec.model {
            ModelKind::Re3l => group_index(d, Grouping::ByStudy),
            _ => (vec![0; d.n()], 0),
        };
        let (blocks, k) = if spec.model == ModelKind::Re2lDep {
            let (study, t) = group_index(d, Grouping::ByStudy);
            let mut blocks = vec![Vec::new(); t];
            for (i, &s) in study.iter().enumerate() {
                blocks[s].push(i);
            }
            (blocks, build_relatedness(d, RelatednessMode::ByStudy).k)
        } else {
            (Vec::new(), 1)
        };

        let spread = if d.n() > 1 { crate::math::sample_variance(&y) } else { 1.0 };
        let start_var = |upper: f64| (0.5 * spread).clamp(1e-4, 0.25 * upper * upper);
        let state = NormalState {
            beta: vec![0.0; p + 1],
            gamma: if spec.covariates == CovariateMode::SpikeSlab { vec![true; p] } else { Vec::new() },
            mu0: vec![0.0; n_groups],
            mu00: vec![0.0; n_studies],
            sigma0_sq: if spec.model == ModelKind::Fe { 0.0 } else { start_var(spec.priors.b0) },
            sigma00_sq: if spec.model == ModelKind::Re3l { start_var(spec.priors.b00) } else { 0.0 },
            psi: 0.0,
        };
        Ok(Self {
            kind: spec.model,
            mode: spec.covariates,
            x,
            weight: var.iter().map(|v| 1.0 / v).collect(),
            c0: stevens_taylor_c0(&var),
            y,
            coef: CoefficientPrior::new(&spec.priors, spec.covariates),
            sigma0_prior: spec.priors.sigma0_prior(),
            sigma00_prior: spec.priors.sigma00_prior(),
            groups,
            studies,
            n_studies,
            blocks,
            k,
            state,
            step: [0.5, 1.0],
            adapting: true,
            window_accepts: 0,
            window_proposals: 0,
            accepts: 0,
            proposals: 0,
        })
    }

    pub fn state(&self) -> &NormalState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut NormalState {
        &mut self.state
    }

    /// Replaces the effect sizes (sampling variances and covariates stay fixed).
    pub fn set_response(&mut self, y: Vec<f64>) {
        assert_eq!(y.len(), self.y.len());
        self.y = y;
    }

    /// Largest related-group size used for the ψ support.
    pub fn relatedness_k(&self) -> usize {
        self.k
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Proposal scales adapt only while this is set; it is cleared after burn-in.
    pub fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
        if !on {
            self.accepts = 0;
            self.proposals = 0;
        }
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposals > 0).then(|| self.accepts as f64 / self.proposals as f64)
    }

    fn level2(&self, i: usize) -> f64 {
        match self.kind {
            ModelKind::Fe => 0.0,
            _ => self.state.mu0[self.groups[i]],
        }
    }

    fn level3(&self, i: usize) -> f64 {
        match self.kind {
            ModelKind::Re3l => self.state.mu00[self.studies[i]],
            _ => 0.0,
        }
    }

    fn fitted(&self, i: usize) -> f64 {
        self.x.row(i).iter().zip(&self.state.beta).map(|(a, b)| a * b).sum()
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.update_beta_gamma(rng)?;
        if self.kind != ModelKind::Fe {
            self.update_random_intercepts(rng)?;
            self.update_variances(rng);
        }
        Ok(())
    }

    pub fn update_beta_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.y.len();
        let target: Vec<f64> = (0..n).map(|i| self.y[i] - self.level2(i) - self.level3(i)).collect();
        let p = self.x.ncols() - 1;
        let prior_var = self.coef.variances(&self.state.gamma, p, 1.0);
        self.state.beta = draw_beta(&self.x, &target, &self.weight, &prior_var, rng)?.iter().copied().collect();
        if self.mode == CovariateMode::SpikeSlab {
            draw_gamma(&self.state.beta, &mut self.state.gamma, &self.coef, 1.0, rng);
        }
        Ok(())
    }

    pub fn update_random_intercepts<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.y.len();
        match self.kind {
            ModelKind::Fe => {}
            ModelKind::Re2l | ModelKind::Re3l => {
                let g = self.state.mu0.len();
                let mut prec = vec![1.0 / self.state.sigma0_sq; g];
                let mut lin = vec![0.0; g];
                for i in 0..n {
                    let r = self.y[i] - self.fitted(i) - self.level3(i);
                    prec[self.groups[i]] += self.weight[i];
                    lin[self.groups[i]] += self.weight[i] * r;
                }
                for j in 0..g {
                    self.state.mu0[j] = lin[j] / prec[j] + std_normal(rng) / prec[j].sqrt();
                }
                if self.kind == ModelKind::Re3l {
                    let t = self.n_studies;
                    let mut prec = vec![1.0 / self.state.sigma00_sq; t];
                    let mut lin = vec![0.0; t];
                    for i in 0..n {
                        let r = self.y[i] - self.fitted(i) - self.level2(i);
                        prec[self.studies[i]] += self.weight[i];
                        lin[self.studies[i]] += self.weight[i] * r;
                    }
                    for s in 0..t {
                        self.state.mu00[s] = lin[s] / prec[s] + std_normal(rng) / prec[s].sqrt();
                    }
                }
            }
            ModelKind::Re2lDep => {
                let eps: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
                let (s, psi) = (self.state.sigma0_sq, self.state.psi);
                for block in &self.blocks {
                    let g = block.len();
                    let a = s - psi;
                    let c = psi / (a * (a + g as f64 * psi));
                    let mut q = DMatrix::from_element(g, g, -c);
                    let mut b = DVector::zeros(g);
                    for (u, &i) in block.iter().enumerate() {
                        q[(u, u)] += 1.0 / a + self.weight[i];
                        b[u] = self.weight[i] * (self.y[i] - self.fitted(i));
                    }
                    let e = DVector::from_iterator(g, block.iter().map(|&i| eps[i]));
                    let mu = gaussian_from_precision_with_noise(q, &b, &e, "correlated intercepts")?;
                    for (u, &i) in block.iter().enumerate() {
                        self.state.mu0[i] = mu[u];
                    }
                }
            }
            ModelKind::Bnp => unreachable!(),
        }
        Ok(())
    }

    pub fn update_variances<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self.kind {
            ModelKind::Fe | ModelKind::Bnp => {}
            ModelKind::Re2l | ModelKind::Re3l => {
                let ss: f64 = self.state.mu0.iter().map(|m| m * m).sum();
                let g = self.state.mu0.len();
                self.state.sigma0_sq = update_scale(self.state.sigma0_sq, ss, g, self.sigma0_prior, rng);
                if self.kind == ModelKind::Re3l {
                    let ss: f64 = self.state.mu00.iter().map(|m| m * m).sum();
                    let t = self.state.mu00.len();
                    self.state.sigma00_sq = update_scale(self.state.sigma00_sq, ss, t, self.sigma00_prior, rng);
                }
            }
            ModelKind::Re2lDep => self.update_sigma_psi(rng),
        }
    }

    /// ψ support (−σ₀²/(K−1), σ₀²); empty when no reports are related.
    fn psi_bounds(&self, s: f64) -> Option<(f64, f64)> {
        (self.k > 1).then(|| (-s / (self.k - 1) as f64, s))
    }

    /// log n(μ₀ | 0, σ₀²I + ψM), evaluated block by block in closed form.
    pub fn log_intercept_density(&self, s: f64, psi: f64) -> f64 {
        let mut total = 0.0;
        for block in &self.blocks {
            let g = block.len() as f64;
            let a = s - psi;
            let lead = a + g * psi;
            if !(a > 0.0 && lead > 0.0) {
                return f64::NEG_INFINITY;
            }
            let sum: f64 = block.iter().map(|&i| self.state.mu0[i]).sum();
            let sq: f64 = block.iter().map(|&i| self.state.mu0[i].powi(2)).sum();
            let log_det = (g - 1.0) * a.ln() + lead.ln();
            let quad = sq / a - psi * sum * sum / (a * lead);
            total -= g * LN_SQRT_2PI + 0.5 * (log_det + quad);
        }
        total
    }

    /// Joint (σ₀², ψ) target on the unconstrained scale (log σ₀², logit of ψ's position in its support).
    fn log_st_target(&self, log_s: f64, logit_u: f64) -> f64 {
        let s = log_s.exp();
        let c0 = self.c0;
        let mut lp = c0.ln() - 2.0 * (c0 + s).ln() + log_s;
        let psi = match self.psi_bounds(s) {
            Some((lo, hi)) => {
                let u = 1.0 / (1.0 + (-logit_u).exp());
                if !(u > 0.0 && u < 1.0) {
                    return f64::NEG_INFINITY;
                }
                lp += u.ln() + (1.0 - u).ln();
                lo + u * (hi - lo)
            }
            None => 0.0,
        };
        lp + self.log_intercept_density(s, psi)
    }

    fn update_sigma_psi<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = self.state.sigma0_sq;
        let cur_b = match self.psi_bounds(s) {
            Some((lo, hi)) => {
                let u = (self.state.psi - lo) / (hi - lo);
                (u / (1.0 - u)).ln()
            }
            None => 0.0,
        };
        let cur_a = s.ln();
        let prop_a = cur_a + self.step[0] * std_normal(rng);
        let prop_b = if self.k > 1 { cur_b + self.step[1] * std_normal(rng) } else { 0.0 };
        let log_ratio = self.log_st_target(prop_a, prop_b) - self.log_st_target(cur_a, cur_b);
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            let s = prop_a.exp();
            self.state.sigma0_sq = s;
            self.state.psi = match self.psi_bounds(s) {
                Some((lo, hi)) => lo + (hi - lo) / (1.0 + (-prop_b).exp()),
                None => 0.0,
            };
        }
        self.proposals += 1;
        self.accepts += accept as usize;
        if self.adapting {
            self.window_proposals += 1;
            self.window_accepts += accept as usize;
            if self.window_proposals == 50 {
                let rate = self.window_accepts as f64 / 50.0;
                let factor = if rate > 0.3 { 1.1 } else { 1.0 / 1.1 };
                self.step = self.step.map(|h| (h * factor).clamp(1e-3, 10.0));
                self.window_proposals = 0;
                self.window_accepts = 0;
            }
        }
    }

    pub fn draw(&self) -> NormalDraw {
        NormalDraw {
            beta: self.state.beta.clone(),
            gamma: self.state.gamma.clone(),
            sigma0_sq: self.state.sigma0_sq,
            sigma00_sq: self.state.sigma00_sq,
            psi: self.state.psi,
        }
    }

    fn check_finite(&self, sweep: usize) -> Result<()> {
        let s = &self.state;
        let ok = s.beta.iter().chain(&s.mu0).chain(&s.mu00).all(|v| v.is_finite())
            && s.sigma0_sq.is_finite()
            && s.sigma00_sq.is_finite()
            && s.psi.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Divergence { sweep, message: format!("non-finite state: {s:?}") })
        }
    }
}

/// Runs one chain: `burn` sweeps discarded, then `keep` draws retained every `thin` sweeps.
pub fn fit_normal(spec: &ModelSpec, d: &MetaDataset, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    mcmc.validate()?;
    let started = Instant::now();
    let mut sampler = NormalSampler::new(spec, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    for sweep in 0..mcmc.burn {
        sampler.sweep(&mut rng)?;
        sampler.check_finite(sweep)?;
    }
    sampler.set_adapting(false);
    let mut draws = Vec::with_capacity(mcmc.keep);
    for k in 0..mcmc.keep * mcmc.thin {
        sampler.sweep(&mut rng)?;
        sampler.check_finite(mcmc.burn + k)?;
        if (k + 1) % mcmc.thin == 0 {
            draws.push(Draw::Normal(sampler.draw()));
        }
    }
    let (_, names) = model_design(d, spec.covariates);
    Ok(PosteriorDraws {
        spec: spec.clone(),
        mcmc: *mcmc,
        covariate_names: names,
        relatedness_k: (spec.model == ModelKind::Re2lDep).then_some(sampler.k),
        draws,
        stats: SamplerStats {
            acceptance_rate: sampler.acceptance_rate(),
            runtime_secs: started.elapsed().as_secs_f64(),
            ..SamplerStats::default()
        },
    })
}
