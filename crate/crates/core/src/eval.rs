//! Posterior predictive densities, the D(m) criterion, Monte Carlo error and model comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MetaDataset;
use crate::diagnostics::{linspace, DensityGrid};
use crate::error::{Error, Result};
use crate::math::{quantile_sorted, sample_variance};
use crate::posterior::PosteriorDraws;

/// Default half-width threshold for a stabilized Monte Carlo estimate.
pub const STABLE_HALFWIDTH: f64 = 0.1;

const CHUNK: usize = 512;

/// Posterior predictive mean and variance at covariates `x` (leading 1) and sampling variance
/// `sigma_sq`, combining per-draw moments by the law of total variance.
pub fn predictive_moments(draws: &PosteriorDraws, x: &[f64], sigma_sq: f64) -> (f64, f64) {
    let w = draws.mcmc.predict_window;
    let parts: Vec<(f64, f64, f64)> = draws
        .draws
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().fold((0.0, 0.0, 0.0), |(s, s2, v), d| {
                let (m, var) = d.predictive_moments(x, sigma_sq, w);
                (s + m, s2 + m * m, v + var)
            })
        })
        .collect();
    let n = draws.len() as f64;
    let (s, s2, v) = parts.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let mean = s / n;
    (mean, v / n + (s2 / n - mean * mean).max(0.0))
}

/// f_n(y | x, σ̂²) on `grid`: the average over draws of each draw's conditional density.
pub fn posterior_predictive_density(
    draws: &PosteriorDraws,
    x: &[f64],
    sigma_sq: f64,
    grid: &[f64],
) -> Result<DensityGrid> {
    if draws.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if x.len() != draws.p() + 1 {
        return Err(Error::Mismatch(format!(
            "covariate vector has {} entries, the model needs {}",
            x.len(),
            draws.p() + 1
        )));
    }
    let w = draws.mcmc.predict_window;
    let parts: Vec<Vec<f64>> = draws
        .draws
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            for d in chunk {
                d.accumulate_density(x, sigma_sq, w, grid, &mut acc);
            }
            acc
        })
        .collect();
    let mut f = vec![0.0; grid.len()];
    for part in parts {
        for (a, b) in f.iter_mut().zip(part) {
            *a += b;
        }
    }
    let n = draws.len() as f64;
    f.iter_mut().for_each(|v| *v /= n);
    DensityGrid::new(grid.to_vec(), f, draws.spec.display_label())
}

/// Grid spanning the observed effect sizes widened by four predictive standard deviations.
pub fn default_grid(draws: &PosteriorDraws, d: &MetaDataset, x: &[f64], sigma_sq: f64, points: usize) -> Vec<f64> {
    let y = d.y();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var_max = d.var().iter().copied().fold(0.0, f64::max);
    predictive_grid(draws, x, sigma_sq, (lo, hi), var_max, points)
}

/// As [`default_grid`], from a stored effect-size range and largest sampling variance.
pub fn predictive_grid(
    draws: &PosteriorDraws,
    x: &[f64],
    sigma_sq: f64,
    y_range: (f64, f64),
    var_max: f64,
    points: usize,
) -> Vec<f64> {
    let (m, v) = predictive_moments(draws, x, sigma_sq);
    let sd = v.sqrt().max(var_max.sqrt());
    linspace(y_range.0.min(m) - 4.0 * sd, y_range.1.max(m) + 4.0 * sd, points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McDiagnostics {
    pub mcse: f64,
    pub halfwidth95: f64,
    pub stabilized: bool,
}

/// Batch-means Monte Carlo standard error with ⌊√N⌋ batches.
pub fn mc_diagnostics(trace: &[f64], threshold: f64) -> Result<McDiagnostics> {
    let n = trace.len();
    if n < 100 {
        return Err(Error::InsufficientData { needed: 100, got: n });
    }
    let batches = (n as f64).sqrt().floor() as usize;
    let size = n / batches;
    // drop the oldest draws that do not fill a batch
    let used = &trace[n - batches * size..];
    let means: Vec<f64> = used.chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let mcse = (sample_variance(&means) / batches as f64).sqrt();
    let halfwidth95 = 1.96 * mcse;
    Ok(McDiagnostics { mcse, halfwidth95, stabilized: halfwidth95 <= threshold })
}

/// D(m) and its per-observation terms for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: String,
    pub d: f64,
    pub sqrt_d: f64,
    pub d_i: Vec<f64>,
    pub sqrt_d_i: Vec<f64>,
    /// Posterior predictive mean E_n of each observation.
    pub predictive_mean: Vec<f64>,
    /// Posterior predictive variance Var_n of each observation.
    pub predictive_var: Vec<f64>,
    /// Monte Carlo error of D from the per-draw discrepancy trace.
    pub d_diagnostics: Option<McDiagnostics>,
    pub seed: u64,
    #[serde(default)]
    pub config_hash: Option<String>,
    /// Effect sizes the criterion was computed on.
    pub y: Vec<f64>,
}

/// D(m) = Σ_i [(y_i − E_n,i)² + Var_n,i], with the predictive moments taken at each report's own
/// covariates and sampling variance.
pub fn d_criterion(draws: &PosteriorDraws, d: &MetaDataset) -> Result<ModelReport> {
    if draws.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let design = crate::normal::model_design(d, draws.spec.covariates).0;
    if design.ncols() != draws.p() + 1 {
        return Err(Error::Mismatch(format!(
            "draws use {} covariates but the dataset supplies {}",
            draws.p(),
            design.ncols() - 1
        )));
    }
    let n = d.n();
    let y = d.y();
    let var = d.var();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| design.row(i).iter().copied().collect()).collect();
    let w = draws.mcmc.predict_window;

    struct Acc {
        m: Vec<f64>,
        sq: Vec<f64>,
        v: Vec<f64>,
        trace: Vec<f64>,
    }
    let parts: Vec<Acc> = draws
        .draws
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Acc { m: vec![0.0; n], sq: vec![0.0; n], v: vec![0.0; n], trace: Vec::with_capacity(chunk.len()) };
            for dr in chunk {
                let mut total = 0.0;
                for i in 0..n {
                    let (m, v) = dr.predictive_moments(&rows[i], var[i], w);
                    let e = y[i] - m;
                    acc.m[i] += m;
                    acc.sq[i] += e * e;
                    acc.v[i] += v;
                    total += e * e + v;
                }
                acc.trace.push(total);
            }
            acc
        })
        .collect();
    let mut m = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Vec::with_capacity(draws.len());
    for part in parts {
        for i in 0..n {
            m[i] += part.m[i];
            sq[i] += part.sq[i];
            v[i] += part.v[i];
        }
        trace.extend(part.trace);
    }
    let k = draws.len() as f64;
    let mut d_i = Vec::with_capacity(n);
    let mut mean = Vec::with_capacity(n);
    let mut pvar = Vec::with_capacity(n);
    for i in 0..n {
        // E[(y − m)²] + E[v] = (y − E_n)² + Var(m) + E[v]
        let di = sq[i] / k + v[i] / k;
        let e = m[i] / k;
        d_i.push(di);
        mean.push(e);
        pvar.push((di - (y[i] - e).powi(2)).max(0.0));
    }
    let total: f64 = d_i.iter().sum();
    Ok(ModelReport {
        label: draws.spec.display_label(),
        d: total,
        sqrt_d: total.sqrt(),
        sqrt_d_i: d_i.iter().map(|v| v.sqrt()).collect(),
        d_i,
        predictive_mean: mean,
        predictive_var: pvar,
        d_diagnostics: mc_diagnostics(&trace, STABLE_HALFWIDTH).ok(),
        seed: draws.mcmc.seed,
        config_hash: None,
        y,
    })
}

/// D from per-observation predictive means and variances.
pub fn d_from_moments(y: &[f64], mean: &[f64], var: &[f64]) -> Vec<f64> {
    y.iter().zip(mean).zip(var).map(|((y, m), v)| (y - m).powi(2) + v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rank: usize,
    pub label: String,
    pub d: f64,
    pub sqrt_d: f64,
    /// (min, Q1, median, Q3, max) of √D_i.
    pub sqrt_d_i_summary: [f64; 5],
    /// 1-based indices of observations whose √D_i exceeds Q3 + 1.5·IQR.
    pub outliers: Vec<usize>,
    pub seed: u64,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn best(&self) -> &ComparisonRow {
        &self.rows[0]
    }
}

pub fn five_number_summary(values: &[f64]) -> [f64; 5] {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&s, q))
}

/// Ranks models by D(m), smallest first; ties are broken by label so input order never matters.
pub fn compare(reports: &[ModelReport]) -> Result<ComparisonReport> {
    let Some(first) = reports.first() else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    for r in reports {
        if r.y != first.y {
            return Err(Error::Mismatch(format!(
                "models `{}` and `{}` were evaluated on different datasets",
                first.label, r.label
            )));
        }
    }
    let mut order: Vec<&ModelReport> = reports.iter().collect();
    order.sort_by(|a, b| a.d.total_cmp(&b.d).then_with(|| a.label.cmp(&b.label)));
    let rows = order
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let summary = five_number_summary(&r.sqrt_d_i);
            let fence = summary[3] + 1.5 * (summary[3] - summary[1]);
            ComparisonRow {
                rank: k + 1,
                label: r.label.clone(),
                d: r.d,
                sqrt_d: r.sqrt_d,
                sqrt_d_i_summary: summary,
                outliers: r
                    .sqrt_d_i
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > fence)
                    .map(|(i, _)| i + 1)
                    .collect(),
                seed: r.seed,
                config_hash: r.config_hash.clone(),
            }
        })
        .collect();
    Ok(ComparisonReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::grid_moments;
    use crate::math::normal_pdf;
    use crate::model::{CovariateMode, McmcConfig, ModelKind, ModelSpec};
    use crate::posterior::{BnpDraw, Draw, NormalDraw, SamplerStats};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fe_draws(betas: &[f64]) -> PosteriorDraws {
        PosteriorDraws {
            spec: ModelSpec::new(ModelKind::Fe, CovariateMode::None),
            mcmc: McmcConfig::default(),
            covariate_names: vec![],
            relatedness_k: None,
            draws: betas
                .iter()
                .map(|&b| Draw::Normal(NormalDraw { beta: vec![b], gamma: vec![], sigma0_sq: 0.0, sigma00_sq: 0.0, psi: 0.0 }))
                .collect(),
            stats: SamplerStats::default(),
        }
    }

    fn report(label: &str, d_i: &[f64]) -> ModelReport {
        ModelReport {
            label: label.into(),
            d: d_i.iter().sum(),
            sqrt_d: d_i.iter().sum::<f64>().sqrt(),
            d_i: d_i.to_vec(),
            sqrt_d_i: d_i.iter().map(|v| v.sqrt()).collect(),
            predictive_mean: vec![0.0; d_i.len()],
            predictive_var: vec![0.0; d_i.len()],
            d_diagnostics: None,
            seed: 1,
            config_hash: None,
            y: vec![0.0; d_i.len()],
        }
    }

    #[test]
    fn point_mass_density_is_exact_normal() {
        let draws = fe_draws(&[0.5]);
        let grid = linspace(-1.0, 2.0, 301);
        let g = posterior_predictive_density(&draws, &[1.0], 0.01, &grid).unwrap();
        for (y, f) in g.y.iter().zip(&g.f) {
            assert!((f - normal_pdf(*y, 0.5, 0.01)).abs() < 1e-12);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let draws = fe_draws(&[0.1, 0.3, 0.2, 0.25]);
        let (m, v) = predictive_moments(&draws, &[1.0], 0.04);
        let grid = linspace(m - 6.0 * v.sqrt(), m + 6.0 * v.sqrt(), 2001);
        let g = posterior_predictive_density(&draws, &[1.0], 0.04, &grid).unwrap();
        assert!((g.integral() - 1.0).abs() < 0.01);
        let s = grid_moments(&g).unwrap();
        assert!((s.mean - m).abs() < 0.01 * v.sqrt() && (s.variance - v).abs() / v < 0.01);
    }

    #[test]
    fn d_of_normal_predictive() {
        assert_eq!(d_from_moments(&[1.0], &[0.0], &[2.0]), vec![3.0]);
    }

    #[test]
    fn d_of_point_masses_is_zero() {
        // FE draw with β₀ = y and vanishing sampling variance
        let d = MetaDataset::from_effects(&[0.7], &[1e-300]).unwrap();
        let r = d_criterion(&fe_draws(&[0.7, 0.7]), &d).unwrap();
        assert!(r.d < 1e-299);
        let exact = MetaDataset::from_effects(&[0.7, 0.7], &[f64::MIN_POSITIVE, f64::MIN_POSITIVE]).unwrap();
        assert!(d_criterion(&fe_draws(&[0.7]), &exact).unwrap().d <= 2.0 * f64::MIN_POSITIVE);
    }

    #[test]
    fn d_matches_quadrature_for_mixture() {
        let draw = BnpDraw {
            beta: vec![0.0],
            gamma: vec![],
            phi: 1.0,
            sigma0_sq: 1.0,
            beta_omega: vec![1.0],
            sigma_omega: 0.6,
            intercepts: vec![(0, -1.5), (1, 0.2), (2, 1.8)],
            fill_seed: 3,
        };
        let draws = PosteriorDraws {
            spec: ModelSpec::new(ModelKind::Bnp, CovariateMode::None),
            draws: vec![Draw::Bnp(draw)],
            ..fe_draws(&[])
        };
        let y = 0.9;
        let d = MetaDataset::from_effects(&[y], &[0.05]).unwrap();
        let r = d_criterion(&draws, &d).unwrap();
        let grid = linspace(-12.0, 12.0, 200_001);
        let g = posterior_predictive_density(&draws, &[1.0], 0.05, &grid).unwrap();
        let integrand: Vec<f64> = g.y.iter().zip(&g.f).map(|(t, f)| (t - y).powi(2) * f).collect();
        let quad = crate::diagnostics::trapezoid(&g.y, &integrand);
        assert!((r.d - quad).abs() / quad < 0.01, "{} vs {quad}", r.d);
    }

    #[test]
    fn d_decomposition() {
        let draws = fe_draws(&[0.1, 0.5, 0.2, 0.4]);
        let d = MetaDataset::from_effects(&[0.3, -0.2, 0.8], &[0.1, 0.2, 0.05]).unwrap();
        let r = d_criterion(&draws, &d).unwrap();
        let two_term: f64 = (0..3).map(|i| (r.y[i] - r.predictive_mean[i]).powi(2)).sum::<f64>()
            + r.predictive_var.iter().sum::<f64>();
        assert!((r.d - two_term).abs() < 1e-12);
        for i in 0..3 {
            let (m, v) = predictive_moments(&draws, &[1.0], d.var()[i]);
            assert!((m - r.predictive_mean[i]).abs() < 1e-12 && (v - r.predictive_var[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mcse_iid_and_ar1() {
        let n = 10_000;
        let mut ratios = Vec::new();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = Normal::new(0.0, 1.0).unwrap();
            let iid: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            ratios.push(mc_diagnostics(&iid, 0.1).unwrap().mcse / 0.01);
        }
        let r = crate::math::mean(&ratios);
        assert!((r - 1.0).abs() < 0.3, "{r}");

        let rho: f64 = 0.9;
        let mut ratios = Vec::new();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let dist = Normal::new(0.0, (1.0 - rho * rho).sqrt()).unwrap();
            let mut x = 0.0;
            let trace: Vec<f64> = (0..n)
                .map(|_| {
                    x = rho * x + dist.sample(&mut rng);
                    x
                })
                .collect();
            let exact = ((1.0 + rho) / (1.0 - rho)).sqrt() / (n as f64).sqrt();
            ratios.push(mc_diagnostics(&trace, 0.1).unwrap().mcse / exact);
        }
        let r = crate::math::mean(&ratios);
        assert!((r - 1.0).abs() < 0.3, "{r}");
    }

    #[test]
    fn mcse_edge_cases() {
        let c = mc_diagnostics(&[2.5; 400], 0.1).unwrap();
        assert_eq!(c.mcse, 0.0);
        assert!(c.stabilized);
        assert!(matches!(mc_diagnostics(&[1.0; 99], 0.1), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn compare_ranks_and_flags() {
        let a = report("D2L-0", &[1.2, 1.2, 1.2, 1.2]);
        let b = report("BNP-ss", &[0.15, 0.15, 0.15, 0.15]);
        let c = compare(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.best().label, "BNP-ss");
        assert!((c.rows[0].d - 0.6).abs() < 1e-12 && (c.rows[1].d - 4.8).abs() < 1e-12);
        assert_eq!(compare(&[b.clone(), a.clone()]).unwrap(), c);
        assert_eq!(compare(std::slice::from_ref(&a)).unwrap().rows.len(), 1);

        let mut spiky = report("FE-0", &[0.01, 0.01, 0.02, 0.01, 0.02, 9.0]);
        spiky.y = vec![0.0; 6];
        let r = compare(&[spiky]).unwrap();
        assert_eq!(r.rows[0].outliers, vec![6]);

        let mut other = report("FE-x", &[1.0; 4]);
        other.y[0] = 1.0;
        assert!(matches!(compare(&[a, other]), Err(Error::Mismatch(_))));
    }
}
