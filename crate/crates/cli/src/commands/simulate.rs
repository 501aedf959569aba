use anyhow::{bail, Context, Result};
use bnpmeta::synthetic::{generate_synthetic, Generator, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::artifact::{csv_string, sha256_hex, Artifacts, Metadata};
use crate::SimulateArgs;

/// Flat generator description read from the `--spec` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// `fixed`, `random-intercepts` or `mixture`.
    pub model: String,
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    pub beta: Vec<f64>,
    pub sigma0_sq: Option<f64>,
    pub locations: Option<Vec<f64>>,
    pub intercept_var: Option<f64>,
    pub membership_slope: Option<f64>,
    pub var_lo: Option<f64>,
    pub var_hi: Option<f64>,
    pub reports_per_study: Option<usize>,
}

impl SimConfig {
    pub fn to_spec(&self) -> Result<SyntheticSpec> {
        let beta = self.beta.clone();
        let generator = match self.model.as_str() {
            "fixed" => Generator::Fixed { beta },
            "random-intercepts" => {
                Generator::RandomIntercepts { beta, sigma0_sq: self.sigma0_sq.context("random-intercepts needs sigma0_sq")? }
            }
            "mixture" => Generator::Mixture {
                beta,
                locations: self.locations.clone().context("mixture needs locations")?,
                intercept_var: self.intercept_var.unwrap_or(0.0),
                membership_slope: self.membership_slope.unwrap_or(0.0),
            },
            other => bail!("unknown generator `{other}` (expected fixed, random-intercepts or mixture)"),
        };
        let mut spec = SyntheticSpec::new(generator, self.n, self.p);
        if let Some(lo) = self.var_lo {
            spec.var_range.0 = lo;
        }
        if let Some(hi) = self.var_hi {
            spec.var_range.1 = hi;
        }
        if let Some(r) = self.reports_per_study {
            spec.reports_per_study = r;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    command: &'static str,
    spec: &'a SimConfig,
    seed: u64,
}

pub fn run(args: &SimulateArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let cfg: SimConfig = toml::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    let spec = cfg.to_spec()?;
    let (d, truth) = generate_synthetic(&spec, args.seed)?;

    let mut header = vec!["study".to_string(), "y".into(), "var".into()];
    header.extend(d.covariate_names().iter().cloned());
    let rows = d.records().iter().enumerate().map(|(i, r)| {
        let mut row = vec![r.study_id.clone(), r.y.to_string(), r.var.to_string()];
        row.extend(d.x_row(i).iter().skip(1).map(|v| v.to_string()));
        row
    });
    let body = csv_string(&header, rows)?;
    let meta = Metadata::new("simulate", &SimulateConfig { command: "simulate", spec: &cfg, seed: args.seed }, Some(args.seed), Some(sha256_hex(body.as_bytes())))?;
    let mut a = Artifacts::new(&args.out, meta);
    a.text("data.csv", &body)?;
    a.json("truth.json", &truth)?;
    println!("wrote {} reports to {}", d.n(), args.out.join("data.csv").display());
    Ok(true)
}
