//! Effect-size statistics and their large-sample sampling variances.
//!
//! The default formulas are the textbook meta-analysis forms with two quirks kept as
//! printed: the Fisher z variance is 1/(n+3) and the Hedges variance carries a single
//! factor c*. [`Variant::Literature`] switches to 1/(n−3) and c*².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub es: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    AsPrinted,
    Literature,
}

/// Small-sample bias correction c* = 1 − 3/(4(n1+n2−2) − 1).
pub fn hedges_correction(n1: u64, n2: u64) -> f64 {
    1.0 - 3.0 / (4.0 * (n1 + n2 - 2) as f64 - 1.0)
}

/// Unbiased standardized mean difference.
pub fn hedges_g(mean1: f64, mean2: f64, var1: f64, var2: f64, n1: u64, n2: u64) -> Result<EffectSizeResult> {
    hedges_g_with(mean1, mean2, var1, var2, n1, n2, Variant::AsPrinted)
}

pub fn hedges_g_with(
    mean1: f64,
    mean2: f64,
    var1: f64,
    var2: f64,
    n1: u64,
    n2: u64,
    variant: Variant,
) -> Result<EffectSizeResult> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::Domain(format!("group sizes must be at least 2, got {n1} and {n2}")));
    }
    if var1 < 0.0 || var2 < 0.0 {
        return Err(Error::Domain("group variances must be non-negative".into()));
    }
    let df = (n1 + n2 - 2) as f64;
    let pooled = ((n1 - 1) as f64 * var1 + (n2 - 1) as f64 * var2) / df;
    if !(pooled > 0.0) {
        return Err(Error::Degenerate("pooled variance is zero".into()));
    }
    let c = hedges_correction(n1, n2);
    let es = (mean1 - mean2) / pooled.sqrt() * c;
    let (a, b) = (n1 as f64, n2 as f64);
    let base = (a + b) / (a * b) + es * es / (2.0 * (a + b));
    let var = match variant {
        Variant::AsPrinted => base * c,
        Variant::Literature => base * c * c,
    };
    Ok(EffectSizeResult { es, var })
}

/// Fisher z transformation of a correlation.
pub fn fisher_z(rho: f64, n: u64) -> Result<EffectSizeResult> {
    fisher_z_with(rho, n, Variant::AsPrinted)
}

pub fn fisher_z_with(rho: f64, n: u64, variant: Variant) -> Result<EffectSizeResult> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    if n < 1 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let var = match variant {
        Variant::AsPrinted => 1.0 / (n as f64 + 3.0),
        Variant::Literature if n > 3 => 1.0 / (n as f64 - 3.0),
        Variant::Literature => return Err(Error::Domain(format!("1/(n-3) needs n > 3, got {n}"))),
    };
    Ok(EffectSizeResult { es: rho.atanh(), var })
}

/// Log odds ratio of a 2×2 table; zero cells are an error (no continuity correction).
pub fn log_odds_ratio(n11: u64, n10: u64, n01: u64, n00: u64) -> Result<EffectSizeResult> {
    if [n11, n10, n01, n00].contains(&0) {
        return Err(Error::ZeroCell);
    }
    let [a, b, c, d] = [n11, n10, n01, n00].map(|v| v as f64);
    Ok(EffectSizeResult { es: ((a / b) / (c / d)).ln(), var: 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d })
}

/// Falconer heritability h² = 2(ρ_MZ − ρ_DZ) and its sampling variance.
pub fn falconer_heritability(rho_mz: f64, n_mz: u64, rho_dz: f64, n_dz: u64) -> Result<EffectSizeResult> {
    if !(-1.0..=1.0).contains(&rho_mz) || !(-1.0..=1.0).contains(&rho_dz) {
        return Err(Error::Domain("twin correlations must lie in [-1, 1]".into()));
    }
    if n_mz == 0 || n_dz == 0 {
        return Err(Error::Domain("twin-pair counts must be at least 1".into()));
    }
    let term = |r: f64, n: u64| (1.0 - r * r).powi(2) / n as f64;
    Ok(EffectSizeResult {
        es: 2.0 * (rho_mz - rho_dz),
        var: 4.0 * (term(rho_mz, n_mz) + term(rho_dz, n_dz)),
    })
}
