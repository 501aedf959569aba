use std::fs::File;

use anyhow::{Context, Result};
use bnpmeta::diagnostics::{anderson_darling, gaussian_kde, grid_moments, sample_moments, AndersonDarling, MomentSummary};
use serde::Serialize;

use crate::artifact::{csv_string, file_hash, Artifacts, Metadata};
use crate::svg::{line_chart, Series};
use crate::DiagnoseArgs;

#[derive(Serialize)]
struct DiagnoseConfig<'a> {
    command: &'static str,
    column: &'a str,
    bandwidth: Option<f64>,
    grid_points: usize,
}

#[derive(Serialize)]
struct Normality {
    n: usize,
    anderson_darling: AndersonDarling,
    sample: MomentSummary,
    kde_bandwidth: f64,
    kde_modes: Vec<f64>,
    kde_moments: MomentSummary,
}

/// Reads one numeric column from a delimited file with a header.
pub fn read_column(path: &std::path::Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let k = r.headers()?.iter().position(|h| h == column).with_context(|| format!("missing column `{column}`"))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec[k].parse().with_context(|| format!("row {}: `{}` is not a number", i + 1, &rec[k]))?;
        out.push(v);
    }
    Ok(out)
}

pub fn run(args: &DiagnoseArgs) -> Result<bool> {
    let values = read_column(&args.data, &args.column)?;
    let ad = anderson_darling(&values)?;
    let kde = gaussian_kde(&values, args.bandwidth, args.grid_points)?;
    let report = Normality {
        n: values.len(),
        anderson_darling: ad,
        sample: sample_moments(&values)?,
        kde_bandwidth: kde.bandwidth.unwrap_or(f64::NAN),
        kde_modes: kde.modes(0.05),
        kde_moments: grid_moments(&kde)?,
    };
    let config = DiagnoseConfig { command: "diagnose", column: &args.column, bandwidth: args.bandwidth, grid_points: args.grid_points };
    let mut a = Artifacts::new(&args.out, Metadata::new("diagnose", &config, None, Some(file_hash(&args.data)?))?);
    a.json("normality.json", &report)?;
    let rows = kde.y.iter().zip(&kde.f).map(|(y, f)| vec![y.to_string(), f.to_string()]);
    a.text("kde.csv", &csv_string(&["y", "density"], rows)?)?;
    if args.svg {
        let chart = line_chart("Kernel density", &args.column, "density", &[Series::new("KDE", kde.y.clone(), kde.f.clone())]);
        a.svg("kde.svg", &chart)?;
    }
    println!(
        "n = {}, A² = {:.4} (adjusted {:.4}), normality rejected at .05: {}, KDE modes: {}",
        report.n,
        ad.a2,
        ad.a2_adjusted,
        if ad.reject_at_05 { "yes" } else { "no" },
        report.kde_modes.len()
    );
    Ok(true)
}
