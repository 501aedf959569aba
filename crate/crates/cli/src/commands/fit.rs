use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bnpmeta::data::{load_dataset, standardize_covariates, StandardizationInfo};
use bnpmeta::eval::{d_criterion, mc_diagnostics, ModelReport};
use bnpmeta::math::quantile_sorted;
use bnpmeta::posterior::SamplerStats;
use bnpmeta::{CovariateMode, McmcConfig, MetaDataset, ModelSpec, Schema};
use serde::{Deserialize, Serialize};

use crate::artifact::{csv_string, file_hash, Artifacts, Metadata};
use crate::{DataArgs, FitArgs};

pub const RUN_FILE: &str = "run.json";
pub const DRAWS_FILE: &str = "draws.csv";
pub const REPORT_FILE: &str = "report.json";

/// Raw-scale range of one covariate column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Everything `predict` and `compare` need to reuse a fitted run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: PathBuf,
    pub dataset_hash: String,
    /// Model specification as TOML, which keeps infinite prior variances intact.
    pub spec_toml: String,
    pub label: String,
    pub mcmc: McmcConfig,
    pub schema: Schema,
    pub standardized: bool,
    pub standardization: Option<StandardizationInfo>,
    pub covariate_names: Vec<String>,
    pub covariate_ranges: Vec<CovariateRange>,
    /// Related groups are sized by report count within a study.
    pub relatedness_convention: String,
    pub relatedness_k: Option<usize>,
    pub y_range: (f64, f64),
    pub max_sampling_var: f64,
    pub n: usize,
    pub d: f64,
    pub sqrt_d: f64,
    pub mcci_threshold: f64,
    pub stats: SamplerStats,
    pub stable: bool,
    pub unstable: Vec<String>,
    pub files: Vec<String>,
}

impl RunRecord {
    pub fn spec(&self) -> Result<ModelSpec> {
        toml::from_str(&self.spec_toml).context("run record holds an invalid model specification")
    }
}

#[derive(Deserialize)]
pub struct StoredRun {
    pub metadata: Metadata,
    #[serde(flatten)]
    pub run: RunRecord,
}

pub fn read_run(dir: &Path) -> Result<StoredRun> {
    let path = dir.join(RUN_FILE);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(f).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_report(dir: &Path) -> Result<ModelReport> {
    let path = dir.join(REPORT_FILE);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(f).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_spec(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ModelSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.validate().with_context(|| format!("invalid specification in {}", path.display()))?;
    Ok(spec)
}

impl DataArgs {
    pub fn schema(&self) -> Schema {
        Schema {
            y: self.y_col.clone(),
            var: self.var_col.clone(),
            study: self.study_col.clone(),
            report: self.report_col.clone(),
            covariates: self.covariates.clone(),
            exclude: self.exclude.clone(),
            ..Schema::default()
        }
    }
}

/// Dataset as the sampler sees it, plus what is needed to map raw covariates onto it.
pub struct Prepared {
    pub data: MetaDataset,
    pub raw: MetaDataset,
    pub standardization: Option<StandardizationInfo>,
    pub dataset_hash: String,
}

pub fn prepare(args: &DataArgs, spec: &ModelSpec) -> Result<Prepared> {
    let schema = args.schema();
    let f = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let raw = load_dataset(f, &schema).with_context(|| format!("loading {}", args.data.display()))?;
    let uses_covariates = spec.covariates != CovariateMode::None && raw.p() > 0;
    let (data, standardization) = if uses_covariates && !args.no_standardize {
        let (d, info) = standardize_covariates(&raw)?;
        (d, Some(info))
    } else {
        (raw.clone(), None)
    };
    Ok(Prepared { data, raw, standardization, dataset_hash: file_hash(&args.data)? })
}

#[derive(Serialize)]
struct FitConfig<'a> {
    command: &'static str,
    spec_toml: &'a str,
    mcmc: &'a McmcConfig,
    schema: &'a Schema,
    standardize: bool,
    mcci_threshold: f64,
}

/// Fits one model and writes its artifacts into `out`.
pub fn fit_to_dir(
    args: &DataArgs,
    spec: &ModelSpec,
    mcmc: &McmcConfig,
    threshold: f64,
    out: &Path,
) -> Result<(RunRecord, ModelReport)> {
    let prep = prepare(args, spec)?;
    let spec_toml = toml::to_string(spec)?;
    let schema = args.schema();
    let config = FitConfig {
        command: "fit",
        spec_toml: &spec_toml,
        mcmc,
        schema: &schema,
        standardize: !args.no_standardize,
        mcci_threshold: threshold,
    };
    let meta = Metadata::new("fit", &config, Some(mcmc.seed), Some(prep.dataset_hash.clone()))?;
    let config_hash = meta.config_hash.clone();

    let draws = bnpmeta::fit(spec, &prep.data, mcmc)?;
    let mut report = d_criterion(&draws, &prep.data)?;
    report.config_hash = Some(config_hash);

    let mut a = Artifacts::new(out, meta);
    let mut buf = Vec::new();
    draws.write_csv(&mut buf)?;
    a.text(DRAWS_FILE, std::str::from_utf8(&buf)?)?;

    let mut unstable = Vec::new();
    let mut rows = Vec::new();
    for (name, trace) in draws.scalar_traces() {
        let mut sorted = trace.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = bnpmeta::math::mean(&trace);
        let sd = bnpmeta::math::sample_variance(&trace).sqrt();
        let mc = mc_diagnostics(&trace, threshold).ok();
        // the occupied-component count is a monitor, not an estimate
        if name != "n_occupied" && !mc.is_some_and(|m| m.stabilized) {
            unstable.push(name.clone());
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(vec![
            name,
            mean.to_string(),
            sd.to_string(),
            quantile_sorted(&sorted, 0.025).to_string(),
            quantile_sorted(&sorted, 0.5).to_string(),
            quantile_sorted(&sorted, 0.975).to_string(),
            opt(mc.map(|m| m.mcse)),
            opt(mc.map(|m| m.halfwidth95)),
            mc.map(|m| (m.halfwidth95 <= threshold).to_string()).unwrap_or_default(),
        ]);
    }
    let d_stable = report.d_diagnostics.is_some_and(|m| m.halfwidth95 <= threshold);
    if !d_stable {
        unstable.push("D".into());
    }
    let dm = report.d_diagnostics;
    rows.push(vec![
        "D".into(),
        report.d.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        dm.map(|m| m.mcse.to_string()).unwrap_or_default(),
        dm.map(|m| m.halfwidth95.to_string()).unwrap_or_default(),
        dm.map(|_| d_stable.to_string()).unwrap_or_default(),
    ]);
    a.text(
        "summary.csv",
        &csv_string(&["param", "mean", "sd", "q2.5", "q50", "q97.5", "mcse", "halfwidth95", "stabilized"], rows)?,
    )?;
    if let Some(incl) = draws.inclusion_probabilities() {
        let rows = incl.into_iter().map(|(n, p)| vec![n, p.to_string()]);
        a.text("inclusion.csv", &csv_string(&["covariate", "inclusion_probability"], rows)?)?;
    }
    a.json(REPORT_FILE, &report)?;

    let y = prep.data.y();
    let covariate_ranges = draws
        .covariate_names
        .iter()
        .map(|name| {
            let k = prep.raw.covariate_index(name).context("fitted covariate missing from the dataset")?;
            let col = prep.raw.covariates().column(k);
            Ok(CovariateRange { name: name.clone(), min: col.min(), max: col.max() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut files: Vec<String> =
        a.written.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    files.push(RUN_FILE.into());
    let record = RunRecord {
        dataset: args.data.clone(),
        dataset_hash: prep.dataset_hash.clone(),
        spec_toml,
        label: report.label.clone(),
        mcmc: *mcmc,
        schema,
        standardized: prep.standardization.is_some(),
        standardization: prep.standardization.clone(),
        covariate_names: draws.covariate_names.clone(),
        covariate_ranges,
        relatedness_convention: "group-size".into(),
        relatedness_k: draws.relatedness_k,
        y_range: (y.iter().copied().fold(f64::INFINITY, f64::min), y.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        max_sampling_var: prep.data.var().iter().copied().fold(0.0, f64::max),
        n: prep.data.n(),
        d: report.d,
        sqrt_d: report.sqrt_d,
        mcci_threshold: threshold,
        // wall-clock time would make otherwise identical runs differ
        stats: SamplerStats { runtime_secs: 0.0, ..draws.stats.clone() },
        stable: unstable.is_empty(),
        unstable,
        files,
    };
    a.json(RUN_FILE, &record)?;
    Ok((record, report))
}

pub fn run(args: &FitArgs) -> Result<bool> {
    let spec = read_spec(&args.spec)?;
    let mcmc = args.mcmc.config(args.mcmc.seed);
    let start = std::time::Instant::now();
    let (record, _) = fit_to_dir(&args.data, &spec, &mcmc, args.mcmc.mcci_threshold, &args.out)?;
    println!(
        "{}: D = {:.4}, sqrt(D) = {:.4} ({} draws, {:.1}s)",
        record.label,
        record.d,
        record.sqrt_d,
        mcmc.keep,
        start.elapsed().as_secs_f64()
    );
    if record.stats.probit_tail_warnings > 0 {
        eprintln!("warning: {} latent probit draws fell far in a tail", record.stats.probit_tail_warnings);
    }
    if !record.stable {
        eprintln!("not stabilized at half-width {}: {}", record.mcci_threshold, record.unstable.join(", "));
    }
    Ok(record.stable || args.allow_unstable)
}
