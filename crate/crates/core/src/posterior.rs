//! Retained MCMC draws and the per-draw predictive distributions they imply.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bnp::mixture_weights;
use crate::error::{Error, Result};
use crate::math::normal_pdf;
use crate::model::{CovariateMode, McmcConfig, ModelKind, ModelSpec};

/// One retained state of a normal fixed- or random-effects model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalDraw {
    pub beta: Vec<f64>,
    /// Inclusion indicators; empty unless the spike-and-slab prior is used.
    pub gamma: Vec<bool>,
    pub sigma0_sq: f64,
    pub sigma00_sq: f64,
    pub psi: f64,
}

impl NormalDraw {
    /// Predictive mean xᵀβ and variance σ̂² + σ₀² + σ₀₀² of a new report with covariates `x` (leading 1).
    pub fn predictive_moments(&self, x: &[f64], sigma_sq: f64) -> (f64, f64) {
        (dot(x, &self.beta), sigma_sq + self.sigma0_sq + self.sigma00_sq)
    }
}

/// One retained state of the mixture model.
///
/// Only occupied intercepts are stored. Any other μ₀ⱼ needed at prediction time is a
/// fixed pseudo-random n(0, σ₀²) value derived from `fill_seed` and j, so predictions
/// from a draw are reproducible and unoccupied components are still prior draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnpDraw {
    pub beta: Vec<f64>,
    pub gamma: Vec<bool>,
    pub phi: f64,
    pub sigma0_sq: f64,
    pub beta_omega: Vec<f64>,
    pub sigma_omega: f64,
    /// Occupied (index, intercept) pairs sorted by index.
    pub intercepts: Vec<(i64, f64)>,
    pub fill_seed: u64,
}

impl BnpDraw {
    pub fn n_occupied(&self) -> usize {
        self.intercepts.len()
    }

    pub fn intercept(&self, j: i64) -> f64 {
        match self.intercepts.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.intercepts[pos].1,
            Err(_) => self.sigma0_sq.sqrt() * hashed_std_normal(self.fill_seed, j),
        }
    }

    /// Normalized mixture weights and component means at covariates `x`.
    pub fn components(&self, x: &[f64], window: f64) -> Vec<(f64, f64)> {
        let eta = dot(x, &self.beta_omega);
        let shift = dot(x, &self.beta);
        let w = mixture_weights(eta, self.sigma_omega, window);
        let total: f64 = w.iter().map(|&(_, p)| p).sum();
        w.into_iter().filter(|&(_, p)| p > 0.0).map(|(j, p)| (p / total, self.intercept(j) + shift)).collect()
    }

    /// Mixture mean Σωm and variance φσ̂² + Σωm² − (Σωm)².
    pub fn predictive_moments(&self, x: &[f64], sigma_sq: f64, window: f64) -> (f64, f64) {
        let comps = self.components(x, window);
        let mean: f64 = comps.iter().map(|&(w, m)| w * m).sum();
        let between: f64 = comps.iter().map(|&(w, m)| w * (m - mean) * (m - mean)).sum();
        (mean, self.phi * sigma_sq + between)
    }
}

/// Standard normal value determined by (seed, j) via splitmix64 and Box–Muller.
fn hashed_std_normal(seed: u64, j: i64) -> f64 {
    let mut state = seed ^ (j as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    // uniforms in (0, 1]
    let u1 = ((next() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (next() >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Draw {
    Normal(NormalDraw),
    Bnp(BnpDraw),
}

impl Draw {
    pub fn beta(&self) -> &[f64] {
        match self {
            Draw::Normal(d) => &d.beta,
            Draw::Bnp(d) => &d.beta,
        }
    }

    pub fn gamma(&self) -> &[bool] {
        match self {
            Draw::Normal(d) => &d.gamma,
            Draw::Bnp(d) => &d.gamma,
        }
    }

    pub fn predictive_moments(&self, x: &[f64], sigma_sq: f64, window: f64) -> (f64, f64) {
        match self {
            Draw::Normal(d) => d.predictive_moments(x, sigma_sq),
            Draw::Bnp(d) => d.predictive_moments(x, sigma_sq, window),
        }
    }

    /// Adds this draw's conditional density at each grid point to `out`.
    pub fn accumulate_density(&self, x: &[f64], sigma_sq: f64, window: f64, grid: &[f64], out: &mut [f64]) {
        match self {
            Draw::Normal(d) => {
                let (m, v) = d.predictive_moments(x, sigma_sq);
                for (o, &y) in out.iter_mut().zip(grid) {
                    *o += normal_pdf(y, m, v);
                }
            }
            Draw::Bnp(d) => {
                let v = d.phi * sigma_sq;
                for (w, m) in d.components(x, window) {
                    for (o, &y) in out.iter_mut().zip(grid) {
                        *o += w * normal_pdf(y, m, v);
                    }
                }
            }
        }
    }
}

/// Counters collected while sampling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    /// Metropolis acceptance rate of the (σ₀², ψ) move after burn-in, when used.
    pub acceptance_rate: Option<f64>,
    /// Latent probit draws whose interval sat more than 8 sd from the mean.
    pub probit_tail_warnings: usize,
    /// Allocation windows that had to be widened.
    pub window_widenings: usize,
    pub runtime_secs: f64,
}

/// Retained draws of one chain together with everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub mcmc: McmcConfig,
    /// Covariates actually used by the model (empty without covariates).
    pub covariate_names: Vec<String>,
    /// Largest related-group size K for the correlated-intercept model.
    pub relatedness_k: Option<usize>,
    pub draws: Vec<Draw>,
    pub stats: SamplerStats,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// Names and per-draw values of every scalar parameter, in the draw-file column order.
    pub fn scalar_traces(&self) -> Vec<(String, Vec<f64>)> {
        let names = self.scalar_names();
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(self.len()); names.len()];
        for d in &self.draws {
            for (c, v) in cols.iter_mut().zip(self.scalar_values(d)) {
                c.push(v);
            }
        }
        names.into_iter().zip(cols).collect()
    }

    fn scalar_names(&self) -> Vec<String> {
        let mut names = vec!["beta0".to_string()];
        names.extend(self.covariate_names.iter().map(|c| format!("beta_{c}")));
        if self.spec.covariates == CovariateMode::SpikeSlab {
            names.extend(self.covariate_names.iter().map(|c| format!("gamma_{c}")));
        }
        match self.spec.model {
            ModelKind::Bnp => {
                names.extend(["phi", "sigma0_sq", "sigma_omega", "beta_omega0"].map(String::from));
                names.extend(self.covariate_names.iter().map(|c| format!("beta_omega_{c}")));
                names.push("n_occupied".into());
            }
            ModelKind::Fe => {}
            ModelKind::Re2l => names.push("sigma0_sq".into()),
            ModelKind::Re2lDep => names.extend(["sigma0_sq", "psi"].map(String::from)),
            ModelKind::Re3l => names.extend(["sigma0_sq", "sigma00_sq"].map(String::from)),
        }
        names
    }

    fn scalar_values(&self, d: &Draw) -> Vec<f64> {
        let mut v: Vec<f64> = d.beta().to_vec();
        if self.spec.covariates == CovariateMode::SpikeSlab {
            v.extend(d.gamma().iter().map(|&g| if g { 1.0 } else { 0.0 }));
        }
        match d {
            Draw::Bnp(b) => {
                v.extend([b.phi, b.sigma0_sq, b.sigma_omega]);
                v.extend(&b.beta_omega);
                v.push(b.n_occupied() as f64);
            }
            Draw::Normal(n) => match self.spec.model {
                ModelKind::Re2l => v.push(n.sigma0_sq),
                ModelKind::Re2lDep => v.extend([n.sigma0_sq, n.psi]),
                ModelKind::Re3l => v.extend([n.sigma0_sq, n.sigma00_sq]),
                _ => {}
            },
        }
        v
    }

    /// Posterior inclusion probabilities Pr[γ_k = 1 | D] under the spike-and-slab prior.
    pub fn inclusion_probabilities(&self) -> Option<Vec<(String, f64)>> {
        if self.spec.covariates != CovariateMode::SpikeSlab || self.is_empty() {
            return None;
        }
        let n = self.len() as f64;
        Some(
            self.covariate_names
                .iter()
                .enumerate()
                .map(|(k, name)| (name.clone(), self.draws.iter().filter(|d| d.gamma()[k]).count() as f64 / n))
                .collect(),
        )
    }

    /// Writes one row per draw. Mixture draws add their seed and occupied intercepts so the
    /// file alone reconstructs every predictive distribution.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.scalar_names();
        let bnp = self.spec.model == ModelKind::Bnp;
        if bnp {
            header.extend(["fill_seed", "intercepts"].map(String::from));
        }
        w.write_record(&header)?;
        for d in &self.draws {
            let mut row: Vec<String> = self.scalar_values(d).iter().map(|v| v.to_string()).collect();
            if let Draw::Bnp(b) = d {
                row.push(b.fill_seed.to_string());
                row.push(b.intercepts.iter().map(|(j, m)| format!("{j}:{m}")).collect::<Vec<_>>().join(";"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads draws written by [`PosteriorDraws::write_csv`]; `#` lines are skipped.
    pub fn read_csv<R: Read>(
        input: R,
        spec: ModelSpec,
        mcmc: McmcConfig,
        covariate_names: Vec<String>,
        relatedness_k: Option<usize>,
    ) -> Result<Self> {
        let mut out = PosteriorDraws { spec, mcmc, covariate_names, relatedness_k, draws: Vec::new(), stats: SamplerStats::default() };
        let names = out.scalar_names();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header.len() < names.len() || header[..names.len()] != names[..] {
            return Err(Error::Schema("draw file columns do not match the model specification".into()));
        }
        let p = out.p();
        let ss = out.spec.covariates == CovariateMode::SpikeSlab;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    row: i + 1,
                    column: header.get(c).cloned().unwrap_or_default(),
                    value: rec.get(c).unwrap_or("").to_owned(),
                })
            };
            let beta = (0..=p).map(num).collect::<Result<Vec<_>>>()?;
            let mut c = p + 1;
            let gamma = if ss {
                let g = (c..c + p).map(|k| num(k).map(|v| v != 0.0)).collect::<Result<Vec<_>>>()?;
                c += p;
                g
            } else {
                Vec::new()
            };
            let draw = match out.spec.model {
                ModelKind::Bnp => {
                    let (phi, sigma0_sq, sigma_omega) = (num(c)?, num(c + 1)?, num(c + 2)?);
                    c += 3;
                    let beta_omega = (c..c + p + 1).map(num).collect::<Result<Vec<_>>>()?;
                    c += p + 2;
                    let bad = |col: usize| Error::Parse {
                        row: i + 1,
                        column: header[col].clone(),
                        value: rec.get(col).unwrap_or("").to_owned(),
                    };
                    let fill_seed = rec.get(c).and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| bad(c))?;
                    let mut intercepts = Vec::new();
                    for item in rec.get(c + 1).unwrap_or("").split(';').filter(|s| !s.is_empty()) {
                        let (j, m) = item.split_once(':').ok_or_else(|| bad(c + 1))?;
                        intercepts.push((
                            j.parse::<i64>().map_err(|_| bad(c + 1))?,
                            m.parse::<f64>().map_err(|_| bad(c + 1))?,
                        ));
                    }
                    Draw::Bnp(BnpDraw { beta, gamma, phi, sigma0_sq, beta_omega, sigma_omega, intercepts, fill_seed })
                }
                kind => {
                    let (mut s0, mut s00, mut psi) = (0.0, 0.0, 0.0);
                    match kind {
                        ModelKind::Re2l => s0 = num(c)?,
                        ModelKind::Re2lDep => (s0, psi) = (num(c)?, num(c + 1)?),
                        ModelKind::Re3l => (s0, s00) = (num(c)?, num(c + 1)?),
                        _ => {}
                    }
                    Draw::Normal(NormalDraw { beta, gamma, sigma0_sq: s0, sigma00_sq: s00, psi })
                }
            };
            out.draws.push(draw);
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
