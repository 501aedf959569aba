//! Meta-analytic datasets: ingestion, covariate standardization and study structure.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One study report: an effect size with its sampling variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub y: f64,
    pub var: f64,
    pub study_id: String,
    pub report_id: String,
}

/// Effect sizes, sampling variances, covariates and study labels for `n` reports.
///
/// Immutable once built; every constructor path validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    records: Vec<Record>,
    covariate_names: Vec<String>,
    covariates: DMatrix<f64>,
}

impl MetaDataset {
    pub fn new(records: Vec<Record>, covariate_names: Vec<String>, covariates: DMatrix<f64>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if covariates.nrows() != records.len() || covariates.ncols() != covariate_names.len() {
            return Err(Error::Mismatch(format!(
                "covariate matrix is {}x{} but there are {} records and {} covariate names",
                covariates.nrows(),
                covariates.ncols(),
                records.len(),
                covariate_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !r.y.is_finite() {
                return Err(Error::RowDomain { row: i + 1, message: format!("effect size {} is not finite", r.y) });
            }
            if !(r.var > 0.0 && r.var.is_finite()) {
                return Err(Error::RowDomain {
                    row: i + 1,
                    message: format!("sampling variance must be strictly positive, got {}", r.var),
                });
            }
            if r.study_id.is_empty() {
                return Err(Error::RowDomain { row: i + 1, message: "missing study id".into() });
            }
            if !seen.insert(r.report_id.as_str()) {
                return Err(Error::RowDomain { row: i + 1, message: format!("duplicate report id `{}`", r.report_id) });
            }
        }
        if let Some(bad) = covariates.iter().position(|v| !v.is_finite()) {
            let row = bad % records.len();
            return Err(Error::RowDomain { row: row + 1, message: "covariate value is not finite".into() });
        }
        Ok(Self { records, covariate_names, covariates })
    }

    /// Convenience constructor for datasets without covariates; each report is its own study.
    pub fn from_effects(y: &[f64], var: &[f64]) -> Result<Self> {
        if y.len() != var.len() {
            return Err(Error::Mismatch("y and var differ in length".into()));
        }
        let records = y
            .iter()
            .zip(var)
            .enumerate()
            .map(|(i, (&y, &var))| Record { y, var, study_id: format!("s{}", i + 1), report_id: (i + 1).to_string() })
            .collect::<Vec<_>>();
        let n = records.len();
        Self::new(records, Vec::new(), DMatrix::zeros(n, 0))
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn y(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn var(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.var).collect()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// n × p covariate matrix (no intercept column).
    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    /// n × (p+1) design matrix with a leading column of ones.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let (n, p) = self.covariates.shape();
        DMatrix::from_fn(n, p + 1, |i, k| if k == 0 { 1.0 } else { self.covariates[(i, k - 1)] })
    }

    /// Covariate row of report `i` with the leading 1.
    pub fn x_row(&self, i: usize) -> Vec<f64> {
        std::iter::once(1.0).chain(self.covariates.row(i).iter().copied()).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// The same reports with only the named covariates kept (in the given order).
    pub fn select_covariates(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.covariate_index(n).ok_or_else(|| Error::MissingColumn { column: n.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let cov = DMatrix::from_fn(self.n(), idx.len(), |i, k| self.covariates[(i, idx[k])]);
        Self::new(self.records.clone(), names.to_vec(), cov)
    }
}

/// Which columns of the delimited input carry which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub y: String,
    pub var: String,
    pub study: String,
    /// Column with report labels; when absent reports are labelled by 1-based row number.
    pub report: Option<String>,
    /// `None` means every remaining column is a covariate.
    pub covariates: Option<Vec<String>>,
    pub exclude: Vec<String>,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            y: "y".into(),
            var: "var".into(),
            study: "study".into(),
            report: None,
            covariates: None,
            exclude: Vec::new(),
            delimiter: b',',
        }
    }
}

/// Reads a delimited text table with a header row. Lines starting with `#` are skipped.
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<MetaDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn { column: name.to_owned() })
    };
    let y_col = find(&schema.y)?;
    let var_col = find(&schema.var)?;
    let study_col = find(&schema.study)?;
    let report_col = schema.report.as_deref().map(find).transpose()?;

    let covariate_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| {
                c != y_col
                    && c != var_col
                    && c != study_col
                    && Some(c) != report_col
                    && !schema.exclude.iter().any(|e| e == &headers[c])
            })
            .collect(),
    };
    for e in &schema.exclude {
        find(e)?;
    }

    let number = |row: usize, col: usize, field: &str| -> Result<f64> {
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Parse { row, column: headers[col].clone(), value: field.to_owned() }),
        }
    };

    let mut records = Vec::new();
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let field = |c: usize| row.get(c).unwrap_or("");
        let y = number(row_no, y_col, field(y_col))?;
        let var = number(row_no, var_col, field(var_col))?;
        if var <= 0.0 {
            return Err(Error::RowDomain {
                row: row_no,
                message: format!("sampling variance must be strictly positive, got {var}"),
            });
        }
        let study_id = field(study_col).to_owned();
        let report_id = match report_col {
            Some(c) => field(c).to_owned(),
            None => row_no.to_string(),
        };
        for &c in &covariate_cols {
            values.push(number(row_no, c, field(c))?);
        }
        records.push(Record { y, var, study_id, report_id });
    }
    let n = records.len();
    let p = covariate_cols.len();
    let covariates = DMatrix::from_row_slice(n, p, &values);
    let names = covariate_cols.iter().map(|&c| headers[c].clone()).collect();
    MetaDataset::new(records, names, covariates)
}

/// Location and scale used to z-standardize one covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StandardizationInfo {
    pub columns: Vec<ColumnScale>,
}

impl StandardizationInfo {
    pub fn standardize(&self, column: usize, raw: f64) -> f64 {
        let c = &self.columns[column];
        (raw - c.mean) / c.sd
    }

    pub fn unstandardize(&self, column: usize, z: f64) -> f64 {
        let c = &self.columns[column];
        z * c.sd + c.mean
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// z-standardizes every covariate column to sample mean 0 and sample variance 1 (n − 1 divisor).
pub fn standardize_covariates(d: &MetaDataset) -> Result<(MetaDataset, StandardizationInfo)> {
    if d.p() == 0 {
        return Err(Error::Degenerate("standardization needs at least one covariate".into()));
    }
    if d.n() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: d.n() });
    }
    let mut cov = d.covariates().clone();
    let mut info = StandardizationInfo::default();
    for (k, name) in d.covariate_names().iter().enumerate() {
        let col: Vec<f64> = cov.column(k).iter().copied().collect();
        let mean = crate::math::mean(&col);
        let sd = crate::math::sample_variance(&col).sqrt();
        if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
            return Err(Error::DegenerateCovariate { column: name.clone() });
        }
        for v in cov.column_mut(k).iter_mut() {
            *v = (*v - mean) / sd;
        }
        info.columns.push(ColumnScale { name: name.clone(), mean, sd });
    }
    let out = MetaDataset::new(d.records().to_vec(), d.covariate_names().to_vec(), cov)?;
    Ok((out, info))
}

/// Assignment of reports to random-intercept groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// Every report is its own group (the "by MZ-DZ" sample grouping).
    ByReport,
    /// Reports sharing a study label share a group.
    ByStudy,
}

/// Group index per report (0-based, in order of first appearance) and the group count.
pub fn group_index(d: &MetaDataset, grouping: Grouping) -> (Vec<usize>, usize) {
    match grouping {
        Grouping::ByReport => ((0..d.n()).collect(), d.n()),
        Grouping::ByStudy => {
            let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
            let mut order = Vec::with_capacity(d.n());
            for r in d.records() {
                let next = ids.len();
                order.push(*ids.entry(r.study_id.as_str()).or_insert(next));
            }
            (order, ids.len())
        }
    }
}

/// Which pairs of reports have correlated level-2 intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatednessMatrix {
    /// Symmetric 0/1 matrix with zero diagonal.
    pub m: DMatrix<f64>,
    /// Size of the largest group of mutually related reports.
    pub k: usize,
}

impl RelatednessMatrix {
    pub fn is_empty(&self) -> bool {
        self.k <= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelatednessMode {
    ByStudy,
}

pub fn build_relatedness(d: &MetaDataset, mode: RelatednessMode) -> RelatednessMatrix {
    let RelatednessMode::ByStudy = mode;
    let n = d.n();
    let recs = d.records();
    let m = DMatrix::from_fn(n, n, |i, l| {
        if i != l && recs[i].study_id == recs[l].study_id {
            1.0
        } else {
            0.0
        }
    });
    let max_row = (0..n).map(|i| m.row(i).sum() as usize).max().unwrap_or(0);
    RelatednessMatrix { m, k: max_row + 1 }
}
