use std::fs::File;

use anyhow::{bail, Context, Result};
use bnpmeta::effect_sizes::{falconer_heritability, fisher_z_with, hedges_g_with, log_odds_ratio, EffectSizeResult, Variant};
use serde::Serialize;

use crate::artifact::{csv_string, file_hash, sha256_hex, Artifacts, Metadata};
use crate::{EsArgs, EsKind, VariantArg};

pub fn columns(kind: EsKind) -> &'static [&'static str] {
    match kind {
        EsKind::Hedges => &["mean1", "mean2", "var1", "var2", "n1", "n2"],
        EsKind::Fisher => &["rho", "n"],
        EsKind::LogOdds => &["n11", "n10", "n01", "n00"],
        EsKind::Falconer => &["rho_mz", "n_mz", "rho_dz", "n_dz"],
    }
}

fn count(v: f64, name: &str) -> Result<u64> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        bail!("{name} must be a non-negative integer, got {v}");
    }
    Ok(v as u64)
}

pub fn compute(kind: EsKind, variant: VariantArg, v: &[f64]) -> Result<EffectSizeResult> {
    let cols = columns(kind);
    if v.len() != cols.len() {
        bail!("{kind:?} needs {} values ({}), got {}", cols.len(), cols.join(", "), v.len());
    }
    let variant = match variant {
        VariantArg::AsPrinted => Variant::AsPrinted,
        VariantArg::Literature => Variant::Literature,
    };
    let r = match kind {
        EsKind::Hedges => hedges_g_with(v[0], v[1], v[2], v[3], count(v[4], "n1")?, count(v[5], "n2")?, variant)?,
        EsKind::Fisher => fisher_z_with(v[0], count(v[1], "n")?, variant)?,
        EsKind::LogOdds => {
            log_odds_ratio(count(v[0], "n11")?, count(v[1], "n10")?, count(v[2], "n01")?, count(v[3], "n00")?)?
        }
        EsKind::Falconer => falconer_heritability(v[0], count(v[1], "n_mz")?, v[2], count(v[3], "n_dz")?)?,
    };
    Ok(r)
}

#[derive(Serialize)]
struct EsConfig<'a> {
    command: &'static str,
    kind: EsKind,
    variant: VariantArg,
    values: &'a Option<Vec<f64>>,
}

pub fn run(args: &EsArgs) -> Result<bool> {
    let cols = columns(args.kind);
    let (header, rows, dataset_hash): (Vec<String>, Vec<Vec<String>>, Option<String>) = match (&args.data, &args.values) {
        (Some(path), _) => {
            let mut r = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .from_reader(File::open(path).with_context(|| format!("opening {}", path.display()))?);
            let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
            let idx: Vec<usize> = cols
                .iter()
                .map(|c| header.iter().position(|h| h == c).with_context(|| format!("missing column `{c}`")))
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            for (i, rec) in r.records().enumerate() {
                let rec = rec?;
                let v: Vec<f64> = idx
                    .iter()
                    .map(|&k| {
                        rec[k].parse::<f64>().with_context(|| format!("row {}: `{}` is not a number", i + 1, &rec[k]))
                    })
                    .collect::<Result<_>>()?;
                let es = compute(args.kind, args.variant, &v).with_context(|| format!("row {}", i + 1))?;
                let mut row: Vec<String> = rec.iter().map(str::to_owned).collect();
                row.extend([es.es.to_string(), es.var.to_string()]);
                rows.push(row);
            }
            (header, rows, Some(file_hash(path)?))
        }
        (None, Some(v)) => {
            let es = compute(args.kind, args.variant, v)?;
            let mut row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            row.extend([es.es.to_string(), es.var.to_string()]);
            let header = cols.iter().map(|c| c.to_string()).collect();
            (header, vec![row], Some(sha256_hex(format!("{v:?}").as_bytes())))
        }
        (None, None) => bail!("give either --data or --values"),
    };
    let mut header = header;
    header.extend(["es".to_string(), "var".to_string()]);
    let body = csv_string(&header, rows)?;
    print!("{body}");
    if let Some(out) = &args.out {
        let config = EsConfig { command: "es", kind: args.kind, variant: args.variant, values: &args.values };
        let mut a = Artifacts::new(out, Metadata::new("es", &config, None, dataset_hash)?);
        a.text("es.csv", &body)?;
    }
    Ok(true)
}
