use anyhow::{bail, Result};
use bnpmeta::bnp::mixture_weights;
use bnpmeta::diagnostics::linspace;
use bnpmeta::math::normal_pdf;
use bnpmeta::posterior::BnpDraw;
use serde::Serialize;

use crate::artifact::{csv_string, Artifacts, Metadata};
use crate::svg::{line_chart, Series};
use crate::WeightsArgs;

#[derive(Serialize)]
struct WeightsConfig<'a> {
    command: &'static str,
    eta: f64,
    sigma: &'a [f64],
    seed: u64,
    window: f64,
    kernel_sd: f64,
    grid_points: usize,
}

/// Weights and standard normal intercepts of one σ_ω setting.
pub fn components(eta: f64, sigma_omega: f64, window: f64, seed: u64) -> Vec<(i64, f64, f64)> {
    // an empty draw with unit intercept variance hands out the same μ_j for every σ_ω
    let draw = BnpDraw {
        beta: vec![0.0],
        gamma: Vec::new(),
        phi: 1.0,
        sigma0_sq: 1.0,
        beta_omega: vec![eta],
        sigma_omega,
        intercepts: Vec::new(),
        fill_seed: seed,
    };
    mixture_weights(eta, sigma_omega, window).into_iter().map(|(j, w)| (j, w, draw.intercept(j))).collect()
}

pub fn run(args: &WeightsArgs) -> Result<bool> {
    if args.sigma.is_empty() || args.sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        bail!("every --sigma value must be positive and finite");
    }
    if !(args.kernel_sd > 0.0) {
        bail!("--kernel-sd must be positive");
    }
    if !(args.window >= 1.0) {
        bail!("--window must be at least 1");
    }
    let config = WeightsConfig {
        command: "weights-demo",
        eta: args.eta,
        sigma: &args.sigma,
        seed: args.seed,
        window: args.window,
        kernel_sd: args.kernel_sd,
        grid_points: args.grid_points,
    };
    let mut a = Artifacts::new(&args.out, Metadata::new("weights-demo", &config, Some(args.seed), None)?);

    let sets: Vec<Vec<(i64, f64, f64)>> = args.sigma.iter().map(|&s| components(args.eta, s, args.window, args.seed)).collect();
    let reach = sets.iter().flatten().map(|c| c.2.abs()).fold(0.0, f64::max) + 4.0 * args.kernel_sd;
    let grid = linspace(-reach, reach, args.grid_points);
    let kvar = args.kernel_sd * args.kernel_sd;

    let mut weight_rows = Vec::new();
    let mut series = Vec::new();
    let mut dens_cols = Vec::new();
    for (&s, comps) in args.sigma.iter().zip(&sets) {
        for &(j, w, mu) in comps {
            weight_rows.push(vec![s.to_string(), j.to_string(), w.to_string(), mu.to_string()]);
        }
        let f: Vec<f64> = grid.iter().map(|&y| comps.iter().map(|&(_, w, mu)| w * normal_pdf(y, mu, kvar)).sum()).collect();
        let big = comps.iter().filter(|c| c.1 > 0.05).count();
        println!("sigma_omega = {s}: {} components in window, {big} with weight above 0.05", comps.len());
        series.push(Series::new(format!("σ_ω = {s}"), grid.clone(), f.clone()));
        dens_cols.push(f);
    }
    a.text("weights.csv", &csv_string(&["sigma_omega", "j", "weight", "intercept"], weight_rows)?)?;
    let mut header = vec!["y".to_string()];
    header.extend(args.sigma.iter().map(|s| format!("sigma_omega_{s}")));
    let rows = grid.iter().enumerate().map(|(i, y)| {
        let mut r = vec![y.to_string()];
        r.extend(dens_cols.iter().map(|c| c[i].to_string()));
        r
    });
    a.text("density.csv", &csv_string(&header, rows)?)?;
    if args.svg {
        a.svg("density.svg", &line_chart(&format!("Induced densities at η = {}", args.eta), "y", "density", &series))?;
    }
    Ok(true)
}
