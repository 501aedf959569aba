use std::fs::File;

use anyhow::{bail, Context, Result};
use bnpmeta::diagnostics::linspace;
use bnpmeta::eval::{posterior_predictive_density, predictive_grid, predictive_moments};
use bnpmeta::PosteriorDraws;
use serde::Serialize;

use super::fit::{read_run, RunRecord, DRAWS_FILE};
use crate::artifact::{csv_string, Artifacts, Metadata};
use crate::svg::{line_chart, Series};
use crate::PredictArgs;

/// Parses `name=value` pairs and checks every name against the fitted covariates.
pub fn parse_assignments(pairs: &[String], names: &[String]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for p in pairs {
        let (name, value) = p.split_once('=').with_context(|| format!("`{p}` is not of the form NAME=VALUE"))?;
        let k = names.iter().position(|n| n == name.trim()).with_context(|| {
            format!("unknown covariate `{}` (fitted covariates: {})", name.trim(), display_names(names))
        })?;
        let v: f64 = value.trim().parse().with_context(|| format!("`{value}` is not a number"))?;
        out.push((k, v));
    }
    Ok(out)
}

fn display_names(names: &[String]) -> String {
    if names.is_empty() { "none".into() } else { names.join(", ") }
}

/// Model-scale covariate vector with a leading 1. Unlisted covariates sit at their mean,
/// which is 0 after standardization.
pub fn model_x(run: &RunRecord, raw: &[(usize, f64)]) -> Vec<f64> {
    let mut x = vec![1.0; run.covariate_names.len() + 1];
    for (k, name) in run.covariate_names.iter().enumerate() {
        x[k + 1] = match &run.standardization {
            Some(info) => info.column(name).map(|c| info.columns[c].mean).unwrap_or(0.0),
            None => 0.0,
        };
    }
    for &(k, v) in raw {
        x[k + 1] = v;
    }
    if let Some(info) = &run.standardization {
        for (k, name) in run.covariate_names.iter().enumerate() {
            if let Some(c) = info.column(name) {
                x[k + 1] = info.standardize(c, x[k + 1]);
            }
        }
    }
    x
}

#[derive(Serialize)]
struct PredictConfig<'a> {
    command: &'static str,
    run_config_hash: &'a str,
    x: &'a [String],
    sigma_sq: f64,
    sweep: &'a Option<String>,
    sweep_points: usize,
    grid_points: usize,
}

#[derive(Serialize)]
struct Moments {
    label: String,
    x_raw: Vec<(String, f64)>,
    sigma_sq: f64,
    mean: f64,
    var: f64,
    sd: f64,
    median: f64,
    q025: f64,
    q975: f64,
    modes: Vec<f64>,
    grid_integral: f64,
}

pub fn run(args: &PredictArgs) -> Result<bool> {
    if !(args.sigma_sq >= 0.0) {
        bail!("--sigma-sq must be non-negative");
    }
    let stored = read_run(&args.run)?;
    let run = stored.run;
    let spec = run.spec()?;
    let path = args.run.join(DRAWS_FILE);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let draws = PosteriorDraws::read_csv(f, spec, run.mcmc, run.covariate_names.clone(), run.relatedness_k)
        .with_context(|| format!("reading {}", path.display()))?;

    let assigned = parse_assignments(&args.x, &run.covariate_names)?;
    let x = model_x(&run, &assigned);
    let raw_x: Vec<(String, f64)> = run
        .covariate_names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let v = match &run.standardization {
                Some(info) => info.column(n).map(|c| info.unstandardize(c, x[k + 1])).unwrap_or(x[k + 1]),
                None => x[k + 1],
            };
            (n.clone(), v)
        })
        .collect();

    let grid = predictive_grid(&draws, &x, args.sigma_sq, run.y_range, run.max_sampling_var, args.grid_points);
    let density = posterior_predictive_density(&draws, &x, args.sigma_sq, &grid)?;
    let (mean, var) = predictive_moments(&draws, &x, args.sigma_sq);

    let config = PredictConfig {
        command: "predict",
        run_config_hash: &stored.metadata.config_hash,
        x: &args.x,
        sigma_sq: args.sigma_sq,
        sweep: &args.sweep,
        sweep_points: args.sweep_points,
        grid_points: args.grid_points,
    };
    let meta = Metadata::new("predict", &config, Some(run.mcmc.seed), Some(run.dataset_hash.clone()))?;
    let mut a = Artifacts::new(&args.out, meta);
    let rows = density.y.iter().zip(&density.f).map(|(y, f)| vec![y.to_string(), f.to_string()]);
    a.text("density.csv", &csv_string(&["y", "density"], rows)?)?;
    let moments = Moments {
        label: run.label.clone(),
        x_raw: raw_x,
        sigma_sq: args.sigma_sq,
        mean,
        var,
        sd: var.sqrt(),
        median: density.quantile(0.5),
        q025: density.quantile(0.025),
        q975: density.quantile(0.975),
        modes: density.modes(0.05),
        grid_integral: density.integral(),
    };
    a.json("moments.json", &moments)?;
    if args.svg {
        let chart = line_chart(
            &format!("Posterior predictive density, {}", run.label),
            "effect size",
            "density",
            &[Series::new(&run.label, density.y.clone(), density.f.clone())],
        );
        a.svg("density.svg", &chart)?;
    }

    if let Some(name) = &args.sweep {
        let k = run.covariate_names.iter().position(|n| n == name).with_context(|| {
            format!("unknown covariate `{name}` (fitted covariates: {})", display_names(&run.covariate_names))
        })?;
        if args.sweep_points < 2 {
            bail!("--sweep-points must be at least 2");
        }
        let range = &run.covariate_ranges[k];
        let mut rows = Vec::new();
        let (mut xs, mut q25, mut q50, mut q75) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for v in linspace(range.min, range.max, args.sweep_points) {
            let mut fixed: Vec<(usize, f64)> = assigned.iter().copied().filter(|&(j, _)| j != k).collect();
            fixed.push((k, v));
            let xv = model_x(&run, &fixed);
            let g = predictive_grid(&draws, &xv, args.sigma_sq, run.y_range, run.max_sampling_var, args.grid_points);
            let dens = posterior_predictive_density(&draws, &xv, args.sigma_sq, &g)?;
            let q = [0.25, 0.5, 0.75].map(|p| dens.quantile(p));
            rows.push(vec![v.to_string(), q[0].to_string(), q[1].to_string(), q[2].to_string()]);
            xs.push(v);
            q25.push(q[0]);
            q50.push(q[1]);
            q75.push(q[2]);
        }
        a.text("sweep.csv", &csv_string(&[name.as_str(), "q25", "median", "q75"], rows)?)?;
        if args.svg {
            let chart = line_chart(
                &format!("Predictive quartiles over {name}, {}", run.label),
                name,
                "effect size",
                &[
                    Series::new("median", xs.clone(), q50),
                    Series::new("q25", xs.clone(), q25).dashed(),
                    Series::new("q75", xs, q75).dashed(),
                ],
            );
            a.svg("sweep.svg", &chart)?;
        }
    }
    println!(
        "{}: predictive mean {:.4}, sd {:.4}, 95% interval [{:.4}, {:.4}], {} mode(s)",
        run.label,
        moments.mean,
        moments.sd,
        moments.q025,
        moments.q975,
        moments.modes.len()
    );
    Ok(true)
}
