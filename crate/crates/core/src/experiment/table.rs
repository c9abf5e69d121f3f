use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Case;
use crate::error::{Error, Result};
use crate::series::{fmt_f64, parse_f64};

pub const CSV_HEADER: &str = "case,p,n,d,df,tau,lambda,rep,error,iterations,converged,seed";

/// One fitted replication at one grid point. `error` is `None` for a
/// missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub case: Case,
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub df: f64,
    pub tau: f64,
    pub lambda: f64,
    pub rep: usize,
    pub error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub n: usize,
    pub df: f64,
    pub tau: f64,
    pub rep: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    /// Reasons for missing cells; not part of the CSV.
    pub missing: Vec<MissingCell>,
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.case.as_str(),
                r.p,
                r.n,
                r.d,
                fmt_f64(r.df),
                fmt_f64(r.tau),
                fmt_f64(r.lambda),
                r.rep,
                r.error.map_or_else(|| "NA".to_string(), fmt_f64),
                r.iterations,
                r.converged,
                r.seed
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            other => return Err(Error::Parse(format!("unexpected results header {other:?}"))),
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
        };
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim_end().split(',').collect();
            if f.len() != 12 {
                return Err(Error::Parse(format!("row {}: expected 12 fields, got {}", k + 1, f.len())));
            }
            rows.push(ResultRow {
                case: Case::parse(f[0])?,
                p: int(f[1])? as usize,
                n: int(f[2])? as usize,
                d: int(f[3])? as usize,
                df: parse_f64(f[4])?,
                tau: parse_f64(f[5])?,
                lambda: parse_f64(f[6])?,
                rep: int(f[7])? as usize,
                error: if f[8] == "NA" { None } else { Some(parse_f64(f[8])?) },
                iterations: int(f[9])? as usize,
                converged: f[10]
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad flag {:?}: {e}", f[10])))?,
                seed: int(f[11])?,
            });
        }
        Ok(Self { rows, missing: Vec::new() })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Empty("results table has no rows".into()));
        }
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Mean and standard error of the estimation error at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub case: Case,
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub df: f64,
    pub tau: f64,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; zero for one replication.
    pub se: f64,
    pub count: usize,
    pub missing: usize,
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// case, p, n, d, and the bit patterns of df and tau
type CellKey = (Case, usize, usize, usize, u64, u64);

/// Aggregate replications per grid point, in first-appearance order.
pub fn summarize(table: &ResultsTable) -> Vec<CellSummary> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<CellKey, (Vec<f64>, usize)> = BTreeMap::new();
    for r in &table.rows {
        let key = (r.case, r.p, r.n, r.d, r.df.to_bits(), r.tau.to_bits());
        let g = groups.entry(key).or_insert_with(|| {
            order.push(key);
            (Vec::new(), 0)
        });
        match r.error {
            Some(e) => g.0.push(e),
            None => g.1 += 1,
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (vals, missing) = &groups[&key];
            let (mean, se) = mean_se(vals);
            CellSummary {
                case: key.0,
                p: key.1,
                n: key.2,
                d: key.3,
                df: f64::from_bits(key.4),
                tau: f64::from_bits(key.5),
                mean,
                se,
                count: vals.len(),
                missing: *missing,
            }
        })
        .collect()
}

pub fn summary_csv(cells: &[CellSummary]) -> String {
    let mut s = String::from("case,p,n,d,df,tau,mean_error,se,count,missing\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.case.as_str(),
            c.p,
            c.n,
            c.d,
            fmt_f64(c.df),
            fmt_f64(c.tau),
            if c.count == 0 { "NA".into() } else { fmt_f64(c.mean) },
            if c.count == 0 { "NA".into() } else { fmt_f64(c.se) },
            c.count,
            c.missing
        );
    }
    s
}
