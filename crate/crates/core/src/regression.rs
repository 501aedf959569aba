//! Regression-coefficient updates shared by the normal and mixture samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::math::{draw_gaussian_from_precision, ln_normal_pdf};
use crate::model::{CovariateMode, PriorConfig};

/// Prior on (β, γ) for a given covariate mode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoefficientPrior {
    pub mode: CovariateMode,
    pub v_intercept: f64,
    pub v_slope: f64,
    pub v0: f64,
    pub v1: f64,
    pub p_incl: f64,
}

impl CoefficientPrior {
    pub fn new(priors: &PriorConfig, mode: CovariateMode) -> Self {
        Self {
            mode,
            v_intercept: priors.v_intercept,
            v_slope: priors.v_slope,
            v0: priors.v0,
            v1: priors.v1,
            p_incl: priors.bernoulli_p,
        }
    }

    /// Prior variance of slope k before any dispersion scaling.
    pub fn slope_var(&self, gamma_k: bool) -> f64 {
        match self.mode {
            CovariateMode::SpikeSlab if gamma_k => self.v1,
            CovariateMode::SpikeSlab => self.v0,
            _ => self.v_slope,
        }
    }

    /// Prior variances of (β₀, β₁, …, β_p); slope variances are multiplied by `scale`.
    pub fn variances(&self, gamma: &[bool], p: usize, scale: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(p + 1);
        v.push(self.v_intercept);
        v.extend((0..p).map(|k| scale * self.slope_var(gamma.get(k).copied().unwrap_or(true))));
        v
    }
}

/// Draws β from n(Q⁻¹b, Q⁻¹) with Q = XᵀWX + diag(1/v) and b = XᵀW·target.
///
/// An infinite prior variance contributes zero prior precision.
pub(crate) fn draw_beta<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    target: &[f64],
    weight: &[f64],
    prior_var: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    let k = x.ncols();
    let mut q = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for i in 0..x.nrows() {
        let w = weight[i];
        for a in 0..k {
            let xa = x[(i, a)] * w;
            b[a] += xa * target[i];
            for c in a..k {
                q[(a, c)] += xa * x[(i, c)];
            }
        }
    }
    for a in 0..k {
        for c in 0..a {
            q[(a, c)] = q[(c, a)];
        }
        if prior_var[a].is_finite() {
            q[(a, a)] += 1.0 / prior_var[a];
        }
    }
    draw_gaussian_from_precision(q, &b, rng, "regression coefficients")
}

/// Stochastic-search indicator update: γ_k | β_k from the spike and slab densities at β_k.
pub(crate) fn draw_gamma<R: Rng + ?Sized>(
    beta: &[f64],
    gamma: &mut [bool],
    prior: &CoefficientPrior,
    scale: f64,
    rng: &mut R,
) {
    let prior_log_odds = prior.p_incl.ln() - (1.0 - prior.p_incl).ln();
    for (k, g) in gamma.iter_mut().enumerate() {
        let b = beta[k + 1];
        let log_odds =
            prior_log_odds + ln_normal_pdf(b, 0.0, scale * prior.v1) - ln_normal_pdf(b, 0.0, scale * prior.v0);
        let p1 = 1.0 / (1.0 + (-log_odds).exp());
        *g = rng.random::<f64>() < p1;
    }
}
