//! Multivariate time series storage and CSV I/O.
//!
//! Rows are time steps and columns are variables. Time stamps are implicit:
//! the row index is the only notion of time.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A `T x n` matrix of finite observations with one name per column.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivariateSeries {
    values: Vec<f64>,
    len: usize,
    names: Vec<String>,
}

impl MultivariateSeries {
    /// Builds a series from row-major `values`; `values.len()` must be a
    /// multiple of `names.len()`.
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidSeries(
                "at least one variable is required".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::InvalidSeries(
                "at least one time step is required".into(),
            ));
        }
        if !values.len().is_multiple_of(n) {
            return Err(Error::InvalidSeries(format!(
                "{} values cannot be arranged into rows of {n} variables",
                values.len()
            )));
        }
        validate_names(&names)?;
        let len = values.len() / n;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { values, len, names })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = names.len();
        if let Some((t, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidSeries(format!(
                "row {t} has {} values, expected {n}",
                row.len()
            )));
        }
        Self::new(names, rows.concat())
    }

    /// Builds a series with default names `x0, x1, ...`.
    pub fn with_default_names(n_vars: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(default_names(n_vars), values)
    }

    pub fn from_matrix(names: Vec<String>, matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != names.len() {
            return Err(Error::InvalidSeries(format!(
                "matrix has {} columns but {} names were given",
                matrix.ncols(),
                names.len()
            )));
        }
        let mut values = Vec::with_capacity(matrix.len());
        for t in 0..matrix.nrows() {
            values.extend(matrix.row(t).iter());
        }
        Self::new(names, values)
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false for a constructed series; kept for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Row-major view of all observations.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.n_vars();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn value(&self, t: usize, var: usize) -> f64 {
        self.values[t * self.n_vars() + var]
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.value(t, var)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_vars())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len, self.n_vars(), &self.values)
    }

    /// Concatenates the given row ranges in the order supplied.
    pub fn select_rows(&self, ranges: &[Range<usize>]) -> Result<Self> {
        let n = self.n_vars();
        let mut values = Vec::new();
        for r in ranges {
            if r.start > r.end || r.end > self.len {
                return Err(Error::InvalidSeries(format!(
                    "row range {}..{} outside 0..{}",
                    r.start, r.end, self.len
                )));
            }
            values.extend_from_slice(&self.values[r.start * n..r.end * n]);
        }
        Self::new(self.names.clone(), values)
    }

    /// Reorders columns so that new column `k` is old column `order[k]`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_vars();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&c| c >= n || std::mem::replace(&mut seen[c], true))
        {
            return Err(Error::InvalidSeries(
                "column order is not a permutation".into(),
            ));
        }
        let names = order.iter().map(|&c| self.names[c].clone()).collect();
        let values = self
            .rows()
            .flat_map(|row| order.iter().map(move |&c| row[c]))
            .collect();
        Self::new(names, values)
    }
}

pub fn default_names(n_vars: usize) -> Vec<String> {
    (0..n_vars).map(|i| format!("x{i}")).collect()
}

fn validate_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::InvalidSeries(format!(
                "variable {i} has an empty name"
            )));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidSeries(format!(
                "duplicate variable name {name:?}"
            )));
        }
    }
    Ok(())
}

fn is_csv_safe(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Reads a header-plus-numeric-rows CSV file. Errors carry 1-based data-row
/// and column positions (row 0 is the header).
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<MultivariateSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |row: usize, column: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_err(0, 0, e.to_string()))?,
        None => return Err(csv_err(0, 0, "missing header row".into())),
    };
    let mut names: Vec<String> = Vec::with_capacity(header.len());
    for (c, field) in header.iter().enumerate() {
        let name = field.trim();
        if !is_csv_safe(name) {
            return Err(csv_err(0, c + 1, format!("invalid variable name {name:?}")));
        }
        if names.iter().any(|existing| existing == name) {
            return Err(csv_err(
                0,
                c + 1,
                format!("duplicate variable name {name:?}"),
            ));
        }
        names.push(name.to_string());
    }
    let n = names.len();

    let mut values = Vec::new();
    let mut row = 0;
    for rec in records {
        row += 1;
        let rec = rec.map_err(|e| csv_err(row, 0, e.to_string()))?;
        if rec.len() != n {
            return Err(csv_err(
                row,
                rec.len().min(n) + 1,
                format!("expected {n} fields, found {}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| csv_err(row, c + 1, format!("non-numeric value {cell:?}")))?;
            if !v.is_finite() {
                return Err(csv_err(row, c + 1, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
    }
    if row == 0 {
        return Err(csv_err(1, 0, "no data rows after the header".into()));
    }
    MultivariateSeries::new(names, values)
}

/// Writes `series` as CSV. Values use the shortest representation that
/// parses back to the identical `f64`.
pub fn write_series_csv(series: &MultivariateSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = series.names().iter().find(|n| !is_csv_safe(n)) {
        return Err(Error::InvalidSeries(format!(
            "variable name {bad:?} is not representable in CSV (allowed: [A-Za-z0-9_])"
        )));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", series.names().join(",")).map_err(io_err)?;
    let mut line = String::new();
    for row in series.rows() {
        line.clear();
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format_number(*v));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
