//! Bayesian meta-analysis: normal fixed/random-effects models and an infinite
//! random-intercepts mixture with covariate-dependent probit weights, fitted by MCMC
//! and compared through the posterior predictive mean-square error D(m).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnp;
pub mod data;
pub mod diagnostics;
pub mod effect_sizes;
pub mod error;
pub mod eval;
pub mod math;
pub mod model;
pub mod normal;
pub mod posterior;
mod regression;
pub mod sampling;
pub mod synthetic;

pub use data::{Grouping, MetaDataset, Record, Schema};
pub use error::{Error, Result};
pub use model::{CovariateMode, McmcConfig, ModelKind, ModelSpec, PriorConfig, ScalePrior};
pub use posterior::{Draw, PosteriorDraws};

/// Fits `spec` to `d` with one seeded chain.
pub fn fit(spec: &ModelSpec, d: &MetaDataset, mcmc: &McmcConfig) -> Result<PosteriorDraws> {
    spec.validate()?;
    match spec.model {
        ModelKind::Bnp => bnp::fit_bnp(spec, d, mcmc),
        _ => normal::fit_normal(spec, d, mcmc),
    }
}
