use std::fmt::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bnpmeta::eval::{compare, ComparisonReport, ModelReport};
use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_to_dir, read_report, read_run, read_spec};
use crate::artifact::{Artifacts, Metadata};
use crate::CompareArgs;

#[derive(Serialize)]
struct CompareConfig<'a> {
    command: &'static str,
    config_hashes: &'a [String],
}

#[derive(Serialize)]
struct CompareBody<'a> {
    runs: &'a [PathBuf],
    #[serde(flatten)]
    report: &'a ComparisonReport,
}

fn slug(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

pub fn render_table(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4}  {:<24} {:>12} {:>9}  {:>8} {:>8} {:>8} {:>8} {:>8}  outliers",
        "rank", "model", "D", "sqrt(D)", "min", "Q1", "median", "Q3", "max"
    );
    for r in &report.rows {
        let q = r.sqrt_d_i_summary;
        let out = if r.outliers.is_empty() {
            "-".to_string()
        } else {
            r.outliers.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            s,
            "{:>4}  {:<24} {:>12.4} {:>9.4}  {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {out}",
            r.rank, r.label, r.d, r.sqrt_d, q[0], q[1], q[2], q[3], q[4]
        );
    }
    s
}

pub fn run(args: &CompareArgs) -> Result<bool> {
    let (dirs, reports, hashes, dataset_hash, stable): (Vec<PathBuf>, Vec<ModelReport>, Vec<String>, String, bool) =
        if !args.runs.is_empty() {
            let mut reports = Vec::new();
            let mut hashes = Vec::new();
            let mut dataset: Option<(PathBuf, String)> = None;
            let mut stable = true;
            for dir in &args.runs {
                let stored = read_run(dir)?;
                match &dataset {
                    Some((first, h)) if *h != stored.run.dataset_hash => bail!(
                        "{} and {} were fitted to different datasets (hash {} vs {})",
                        first.display(),
                        dir.display(),
                        &h[..12],
                        &stored.run.dataset_hash[..12.min(stored.run.dataset_hash.len())]
                    ),
                    Some(_) => {}
                    None => dataset = Some((dir.clone(), stored.run.dataset_hash.clone())),
                }
                stable &= stored.run.stable;
                hashes.push(stored.metadata.config_hash);
                reports.push(read_report(dir)?);
            }
            let (_, h) = dataset.context("no runs given")?;
            (args.runs.clone(), reports, hashes, h, stable)
        } else if !args.spec.is_empty() {
            let data = args.data_args().context("--spec needs --data")?;
            let specs = args.spec.iter().map(|p| read_spec(p)).collect::<Result<Vec<_>>>()?;
            let results = specs
                .par_iter()
                .enumerate()
                .map(|(k, spec)| {
                    let mcmc = args.mcmc.config(args.mcmc.seed + k as u64);
                    let dir = args.out.join("runs").join(format!("{:02}-{}", k + 1, slug(&spec.display_label())));
                    fit_to_dir(&data, spec, &mcmc, args.mcmc.mcci_threshold, &dir)
                        .with_context(|| format!("fitting {}", args.spec[k].display()))
                        .map(|(rec, rep)| (dir, rec, rep))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut dirs = Vec::new();
            let mut reports = Vec::new();
            let mut hashes = Vec::new();
            let mut stable = true;
            let mut h = String::new();
            for (dir, rec, rep) in results {
                stable &= rec.stable;
                h = rec.dataset_hash.clone();
                hashes.push(rep.config_hash.clone().unwrap_or_default());
                dirs.push(dir);
                reports.push(rep);
            }
            (dirs, reports, hashes, h, stable)
        } else {
            bail!("give either --runs or --spec");
        };

    let report = compare(&reports)?;
    let meta = Metadata::new("compare", &CompareConfig { command: "compare", config_hashes: &hashes }, None, Some(dataset_hash))?;
    let mut a = Artifacts::new(&args.out, meta);
    let table = render_table(&report);
    a.text("comparison.txt", &table)?;
    a.json("comparison.json", &CompareBody { runs: &dirs, report: &report })?;
    print!("{table}");
    if !stable {
        eprintln!("at least one run has Monte Carlo estimates that are not stabilized");
    }
    Ok(stable || args.allow_unstable)
}
