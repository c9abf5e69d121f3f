//! `n × p` observation matrices (row = time point) and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix(DMatrix<f64>);

/// Shortest exponent form carrying 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

impl TimeSeriesMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty("time series needs at least one row and column".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("time series must be finite".into()));
        }
        Ok(Self(data))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// CSV with header `t,z1,…,zp`, one row per time point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.p() {
            let _ = write!(out, ",z{j}");
        }
        out.push('\n');
        for (t, row) in self.0.row_iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in row.iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty time series file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("expected header t,z1,...,zp; got {header:?}")));
        }
        let p = cols.len() - 1;
        let mut values = Vec::new();
        let mut n = 0;
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != p + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    p + 1
                )));
            }
            for f in &fields[1..] {
                values.push(parse_f64(f)?);
            }
            n += 1;
        }
        Self::new(DMatrix::from_row_slice(n, p, &values))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_csv(&text)
    }
}
