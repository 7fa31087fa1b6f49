//! Sample-indexed predictor blocks and response vectors, with their CSV forms.
//!
//! Feature / spectra CSV: `id,<col1>,...,<colp>` (header row required).
//! Response CSV: `id,value`. UTF-8, LF line endings.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what}: need at least {needed} samples, got {got}")]
    TooFewSamples { what: String, needed: usize, got: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("non-finite value for sample `{id}`")]
    NonFinite { id: String },
    #[error("{0} ids but {1} rows")]
    Length(usize, usize),
    #[error("ids do not align: missing from predictors {missing_in_x:?}, missing from responses {missing_in_y:?}")]
    Misaligned { missing_in_x: Vec<String>, missing_in_y: Vec<String> },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: String, line: u64, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// n samples by p variables, with sample ids and a block tag.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    ids: Vec<String>,
    columns: Vec<String>,
    x: DMatrix<f64>,
    tag: String,
}

fn check_ids(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(DataError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl DataBlock {
    pub fn new(ids: Vec<String>, x: DMatrix<f64>, tag: impl Into<String>) -> Result<Self> {
        let columns = (1..=x.ncols()).map(|j| format!("v{j}")).collect();
        Self::with_columns(ids, columns, x, tag)
    }

    pub fn with_columns(ids: Vec<String>, columns: Vec<String>, x: DMatrix<f64>, tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        if ids.len() != x.nrows() {
            return Err(DataError::Length(ids.len(), x.nrows()));
        }
        if columns.len() != x.ncols() {
            return Err(DataError::Length(columns.len(), x.ncols()));
        }
        if ids.len() < 2 {
            return Err(DataError::TooFewSamples { what: format!("block `{tag}`"), needed: 2, got: ids.len() });
        }
        check_ids(&ids)?;
        if let Some(i) = (0..x.nrows()).find(|&i| x.row(i).iter().any(|v| !v.is_finite())) {
            return Err(DataError::NonFinite { id: ids[i].clone() });
        }
        Ok(Self { ids, columns, x, tag })
    }

    /// Ids `s0, s1, ...`.
    pub fn from_matrix(x: DMatrix<f64>, tag: impl Into<String>) -> Result<Self> {
        let ids = (0..x.nrows()).map(|i| format!("s{i}")).collect();
        Self::new(ids, x, tag)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.x.ncols()
    }

    /// Rows in the order of `ids`.
    pub fn select(&self, ids: &[String]) -> Result<DataBlock> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let missing: Vec<String> = ids.iter().filter(|id| !index.contains_key(id.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(DataError::Misaligned { missing_in_x: missing, missing_in_y: vec![] });
        }
        let rows: Vec<usize> = ids.iter().map(|id| index[id.as_str()]).collect();
        let x = self.x.select_rows(rows.iter());
        Self::with_columns(ids.to_vec(), self.columns.clone(), x, self.tag.clone())
    }

    pub fn read_csv(path: impl AsRef<Path>, tag: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = rdr.headers()?.clone();
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut fields = rec.iter();
            ids.push(fields.next().unwrap_or_default().to_string());
            for f in fields {
                values.push(f.trim().parse::<f64>().map_err(|e| DataError::Parse {
                    path: path.display().to_string(),
                    line,
                    reason: format!("`{f}`: {e}"),
                })?);
            }
        }
        let x = DMatrix::from_row_slice(ids.len(), columns.len(), &values);
        Self::with_columns(ids, columns, x, tag)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.x.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| DataError::Io(e.into_error()))
    }
}

/// Reference values keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    ids: Vec<String>,
    y: Vec<f64>,
}

impl ResponseVector {
    pub fn new(ids: Vec<String>, y: Vec<f64>) -> Result<Self> {
        if ids.len() != y.len() {
            return Err(DataError::Length(ids.len(), y.len()));
        }
        check_ids(&ids)?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { id: ids[i].clone() });
        }
        Ok(Self { ids, y })
    }

    pub fn from_values(y: Vec<f64>) -> Result<Self> {
        Self::new((0..y.len()).map(|i| format!("s{i}")).collect(), y)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Values reordered to match `block`'s sample order.
    pub fn aligned_to(&self, block: &DataBlock) -> Result<Vec<f64>> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let block_ids: HashSet<&str> = block.ids().iter().map(String::as_str).collect();
        let missing_in_y: Vec<String> =
            block.ids().iter().filter(|id| !index.contains_key(id.as_str())).cloned().collect();
        let missing_in_x: Vec<String> = self.ids.iter().filter(|id| !block_ids.contains(id.as_str())).cloned().collect();
        if !missing_in_x.is_empty() || !missing_in_y.is_empty() {
            return Err(DataError::Misaligned { missing_in_x, missing_in_y });
        }
        Ok(block.ids().iter().map(|id| self.y[index[id.as_str()]]).collect())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut ids = Vec::new();
        let mut y = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let parse_err = |reason: String| DataError::Parse { path: path.display().to_string(), line, reason };
            if rec.len() != 2 {
                return Err(parse_err(format!("expected 2 fields, got {}", rec.len())));
            }
            ids.push(rec[0].to_string());
            y.push(rec[1].trim().parse::<f64>().map_err(|e| parse_err(format!("`{}`: {e}", &rec[1])))?);
        }
        Self::new(ids, y)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["id", "value"])?;
        for (id, v) in self.ids.iter().zip(&self.y) {
            w.write_record([id.as_str(), &v.to_string()])?;
        }
        w.into_inner().map_err(|e| DataError::Io(e.into_error()))
    }
}
