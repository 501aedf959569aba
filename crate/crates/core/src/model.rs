//! Model specifications, prior hyperparameters and MCMC run settings.

use serde::{Deserialize, Serialize};

use crate::data::Grouping;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Normal fixed-effects regression.
    Fe,
    /// Two-level normal random intercepts.
    #[serde(rename = "re2l", alias = "2l")]
    Re2l,
    /// Two-level random intercepts correlated within studies.
    #[serde(rename = "re2l-dep", alias = "d2l")]
    Re2lDep,
    /// Three-level: report intercepts nested in study intercepts.
    #[serde(rename = "re3l", alias = "3l")]
    Re3l,
    /// Infinite random-intercepts mixture with probit weights.
    Bnp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateMode {
    /// Intercept only; covariate columns are ignored.
    #[default]
    None,
    /// Every covariate with a diffuse normal slope prior.
    All,
    /// Every covariate with a spike-and-slab prior and inclusion indicator.
    SpikeSlab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalePriorKind {
    /// σ ~ un(0, b).
    #[default]
    Uniform,
    /// σ⁻² ~ ga(ε, ε).
    InverseGamma,
    /// σ ~ half-t(scale, df).
    HalfT,
}

/// Prior on a random-intercept standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePrior {
    Uniform { upper: f64 },
    InverseGamma { eps: f64 },
    HalfT { scale: f64, df: f64 },
}

/// Prior hyperparameters shared across the model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Prior variance of the intercept β₀ (`inf` gives a flat prior).
    pub v_intercept: f64,
    /// Prior variance of slopes when every covariate is kept.
    pub v_slope: f64,
    /// Spike variance.
    pub v0: f64,
    /// Slab variance.
    pub v1: f64,
    /// Prior inclusion probability Pr(γ_k = 1).
    pub bernoulli_p: f64,
    pub scale_prior: ScalePriorKind,
    /// Upper bound of the uniform prior on σ₀.
    pub b0: f64,
    /// Upper bound of the uniform prior on σ₀₀.
    pub b00: f64,
    pub ig_eps: f64,
    pub half_t_scale: f64,
    pub half_t_df: f64,
    /// Prior belief a_φ in φ⁻¹ ~ ga(a_φ/2, a_φ/2).
    pub a_phi: f64,
    /// β_ω | σ_ω² ~ n(0, σ_ω²·omega_scale·I).
    pub omega_scale: f64,
    /// σ_ω⁻² ~ ga(omega_shape, omega_rate).
    pub omega_shape: f64,
    pub omega_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            v_intercept: 1e5,
            v_slope: 1e5,
            v0: 0.001,
            v1: 10.0,
            bernoulli_p: 0.5,
            scale_prior: ScalePriorKind::Uniform,
            b0: 100.0,
            b00: 100.0,
            ig_eps: 0.001,
            half_t_scale: 25.0,
            half_t_df: 1.0,
            a_phi: 0.5,
            omega_scale: 1e5,
            omega_shape: 1.0,
            omega_rate: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_intercept", self.v_intercept),
            ("v_slope", self.v_slope),
            ("v0", self.v0),
            ("v1", self.v1),
            ("b0", self.b0),
            ("b00", self.b00),
            ("ig_eps", self.ig_eps),
            ("half_t_scale", self.half_t_scale),
            ("half_t_df", self.half_t_df),
            ("a_phi", self.a_phi),
            ("omega_scale", self.omega_scale),
            ("omega_shape", self.omega_shape),
            ("omega_rate", self.omega_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.bernoulli_p > 0.0 && self.bernoulli_p < 1.0) {
            return Err(Error::Spec(format!("bernoulli_p must lie in (0, 1), got {}", self.bernoulli_p)));
        }
        if self.v1 / self.v0 > 10_000.0 {
            return Err(Error::Spec(format!("v1/v0 = {} exceeds 10000", self.v1 / self.v0)));
        }
        if self.v1 <= self.v0 {
            return Err(Error::Spec("the slab variance v1 must exceed the spike variance v0".into()));
        }
        Ok(())
    }

    pub fn sigma0_prior(&self) -> ScalePrior {
        self.scale_prior_with(self.b0)
    }

    pub fn sigma00_prior(&self) -> ScalePrior {
        self.scale_prior_with(self.b00)
    }

    fn scale_prior_with(&self, upper: f64) -> ScalePrior {
        match self.scale_prior {
            ScalePriorKind::Uniform => ScalePrior::Uniform { upper },
            ScalePriorKind::InverseGamma => ScalePrior::InverseGamma { eps: self.ig_eps },
            ScalePriorKind::HalfT => ScalePrior::HalfT { scale: self.half_t_scale, df: self.half_t_df },
        }
    }
}

/// A fully specified model: family, covariate handling, grouping and priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: ModelKind,
    #[serde(default)]
    pub covariates: CovariateMode,
    /// Random-intercept grouping for two-level models.
    #[serde(default = "default_grouping")]
    pub grouping: Grouping,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub priors: PriorConfig,
}

fn default_grouping() -> Grouping {
    Grouping::ByReport
}

impl ModelSpec {
    pub fn new(model: ModelKind, covariates: CovariateMode) -> Self {
        Self { model, covariates, grouping: Grouping::ByReport, label: None, priors: PriorConfig::default() }
    }

    pub fn with_grouping(mut self, grouping: Grouping) -> Self {
        self.grouping = grouping;
        self
    }

    pub fn with_priors(mut self, priors: PriorConfig) -> Self {
        self.priors = priors;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()
    }

    /// Short table label such as `FE-0`, `2L-x, by Study` or `BNP-ss`.
    pub fn display_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let family = match self.model {
            ModelKind::Fe => "FE",
            ModelKind::Re2l => "2L",
            ModelKind::Re2lDep => "D2L",
            ModelKind::Re3l => "3L",
            ModelKind::Bnp => "BNP",
        };
        let cov = match self.covariates {
            CovariateMode::None => "0",
            CovariateMode::All => "x",
            CovariateMode::SpikeSlab => "ss",
        };
        match (self.model, self.grouping) {
            (ModelKind::Re2l, Grouping::ByReport) => format!("{family}-{cov}, by report"),
            (ModelKind::Re2l, Grouping::ByStudy) => format!("{family}-{cov}, by study"),
            _ => format!("{family}-{cov}"),
        }
    }
}

/// Run length, thinning, seed and truncation windows of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub burn: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Mixture truncation window (in σ_ω units) while sampling.
    pub window: f64,
    /// Mixture truncation window for predictive evaluation.
    pub predict_window: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { burn: 2_000, keep: 200_000, thin: 1, seed: 1, window: 6.0, predict_window: 8.0 }
    }
}

impl McmcConfig {
    pub fn new(burn: usize, keep: usize, seed: u64) -> Self {
        Self { burn, keep, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keep == 0 {
            return Err(Error::Spec("keep must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::Spec("thin must be at least 1".into()));
        }
        if !(self.window >= 1.0) || !(self.predict_window >= 1.0) {
            return Err(Error::Spec("truncation windows must be at least 1".into()));
        }
        Ok(())
    }
}
