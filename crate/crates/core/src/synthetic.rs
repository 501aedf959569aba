//! Seeded synthetic meta-analyses drawn from known generating models.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{MetaDataset, Record};
use crate::error::{Error, Result};

/// Generating model for the effect sizes. `beta` holds (β₀, β₁, …, β_p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Generator {
    Fixed { beta: Vec<f64> },
    RandomIntercepts { beta: Vec<f64>, sigma0_sq: f64 },
    /// Report intercepts drawn around one of `locations`. Membership is ordinal probit in
    /// `membership_slope · x₁ + e`, e ~ N(0,1), with equal-probability cut points, so with two
    /// locations P(upper | x) = Φ(membership_slope · x₁).
    Mixture { beta: Vec<f64>, locations: Vec<f64>, intercept_var: f64, membership_slope: f64 },
}

impl Generator {
    pub fn beta(&self) -> &[f64] {
        match self {
            Generator::Fixed { beta } | Generator::RandomIntercepts { beta, .. } | Generator::Mixture { beta, .. } => beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub n: usize,
    pub p: usize,
    /// σ̂_i² ~ Uniform(lo, hi).
    #[serde(default = "default_var_range")]
    pub var_range: (f64, f64),
    /// Consecutive reports sharing a study label.
    #[serde(default = "one")]
    pub reports_per_study: usize,
}

fn default_var_range() -> (f64, f64) {
    (0.01, 0.25)
}

fn one() -> usize {
    1
}

impl SyntheticSpec {
    pub fn new(generator: Generator, n: usize, p: usize) -> Self {
        Self { generator, n, p, var_range: default_var_range(), reports_per_study: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Spec("n must be positive".into()));
        }
        if self.generator.beta().len() != self.p + 1 {
            return Err(Error::Spec(format!(
                "beta has {} entries, expected p + 1 = {}",
                self.generator.beta().len(),
                self.p + 1
            )));
        }
        let (lo, hi) = self.var_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Spec(format!("variance range ({lo}, {hi}) must be positive and ordered")));
        }
        if self.reports_per_study == 0 {
            return Err(Error::Spec("reports_per_study must be positive".into()));
        }
        match &self.generator {
            Generator::RandomIntercepts { sigma0_sq, .. } if !(*sigma0_sq >= 0.0) => {
                Err(Error::Spec("sigma0_sq must be non-negative".into()))
            }
            Generator::Mixture { locations, intercept_var, membership_slope, .. } => {
                if locations.is_empty() || !(*intercept_var >= 0.0) || !membership_slope.is_finite() {
                    Err(Error::Spec("mixture needs locations, a non-negative intercept_var and a finite slope".into()))
                } else if *membership_slope != 0.0 && self.p == 0 {
                    Err(Error::Spec("covariate-driven membership needs p >= 1".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// What the generator actually drew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub generator: Generator,
    pub seed: u64,
    /// Random intercept of each report (zero under the fixed model).
    pub intercepts: Vec<f64>,
    /// Mixture location index of each report; empty for the normal generators.
    pub components: Vec<usize>,
}

/// Draws a dataset from `spec`. Covariates, sampling variances and sampling noise come first for
/// every report, random effects afterwards, so a zero random-effect variance reproduces the
/// fixed-effects data for the same seed.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(MetaDataset, Truth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (spec.n, spec.p);
    let (lo, hi) = spec.var_range;
    let mut x = DMatrix::zeros(n, p);
    let mut var = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..n {
        for k in 0..p {
            x[(i, k)] = rng.sample::<f64, _>(StandardNormal);
        }
        var.push(if hi > lo { rng.random_range(lo..hi) } else { lo });
        noise.push(rng.sample::<f64, _>(StandardNormal));
    }

    let mut intercepts = vec![0.0; n];
    let mut components = Vec::new();
    match &spec.generator {
        Generator::Fixed { .. } => {}
        Generator::RandomIntercepts { sigma0_sq, .. } => {
            for u in intercepts.iter_mut() {
                *u = sigma0_sq.sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Generator::Mixture { locations, intercept_var, membership_slope, .. } => {
            let k = locations.len();
            let std = Normal::standard();
            let cuts: Vec<f64> = (1..k).map(|c| std.inverse_cdf(c as f64 / k as f64)).collect();
            for i in 0..n {
                let drive = if p > 0 { membership_slope * x[(i, 0)] } else { 0.0 };
                let t = drive + rng.sample::<f64, _>(StandardNormal);
                let c = cuts.iter().filter(|&&cut| t > cut).count();
                components.push(c);
                intercepts[i] = locations[c] + intercept_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    let beta = spec.generator.beta();
    let records = (0..n)
        .map(|i| {
            let mean = beta[0] + (0..p).map(|k| beta[k + 1] * x[(i, k)]).sum::<f64>() + intercepts[i];
            Record {
                y: mean + var[i].sqrt() * noise[i],
                var: var[i],
                study_id: format!("S{}", i / spec.reports_per_study + 1),
                report_id: format!("R{}", i + 1),
            }
        })
        .collect();
    let names = (1..=p).map(|k| format!("x{k}")).collect();
    let d = MetaDataset::new(records, names, x)?;
    Ok((d, Truth { generator: spec.generator.clone(), seed, intercepts, components }))
}
