//! Normal-distribution special functions and small dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use libm::erfc;

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Lower tail Φ(x), computed through `erfc` so the left tail keeps full relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail 1 − Φ(x).
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// ln Φ(x), falling back to the Mills-ratio asymptote once Φ underflows.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    let p = std_normal_cdf(x);
    if p > 0.0 {
        p.ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (1.0 - 1.0 / x2).ln()
    }
}

/// Φ(b) − Φ(a) for a ≤ b, evaluated on whichever tail avoids cancellation.
pub fn std_normal_interval(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    }
}

/// Log density of n(y | mean, var).
pub fn ln_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

pub fn normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    std_normal_pdf((y - mean) / sd) / sd
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the n − 1 divisor.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Linear-interpolated quantile of an already sorted slice (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn condition_number(matrix: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(matrix.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Draws from n(Q⁻¹b, Q⁻¹) given a symmetric positive-definite precision `Q` and linear term `b`.
///
/// Consumes exactly `b.len()` standard normal variates, in index order.
pub fn draw_gaussian_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
    what: &str,
) -> Result<DVector<f64>> {
    let eps = DVector::from_fn(linear.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    gaussian_from_precision_with_noise(precision, linear, &eps, what)
}

/// Q⁻¹b + L⁻ᵀε where Q = LLᵀ; with ε standard normal this is a draw from n(Q⁻¹b, Q⁻¹).
pub fn gaussian_from_precision_with_noise(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    eps: &DVector<f64>,
    what: &str,
) -> Result<DVector<f64>> {
    let chol = match precision.clone().cholesky() {
        Some(c) => c,
        None => {
            return Err(Error::Numerical {
                message: format!("{what}: conditional precision is not positive definite"),
                condition_number: condition_number(&precision),
            })
        }
    };
    let mean = chol.solve(linear);
    let noise = chol
        .l()
        .tr_solve_lower_triangular(eps)
        .expect("Cholesky factor has a positive diagonal");
    Ok(mean + noise)
}
