//! VAR(d) models: companion form, stability, column-wise estimation and the
//! estimation-error metric.

mod fit;
mod linalg;

pub use fit::{
    decompose_regressions, estimation_error, fit_var, theory_lambda, FitConfig, LambdaMode,
    VarFit,
};
pub use linalg::{kron, rescale_to_radius, spectral_radius};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{fmt_f64, parse_f64};

/// `Z_t = B_1ᵀ Z_{t−1} + … + B_dᵀ Z_{t−d} + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarModelRaw", into = "VarModelRaw")]
pub struct VarModel {
    coeffs: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct VarModelRaw {
    #[serde(with = "crate::matrix_serde::vec")]
    coeffs: Vec<DMatrix<f64>>,
}

impl TryFrom<VarModelRaw> for VarModel {
    type Error = Error;

    fn try_from(raw: VarModelRaw) -> Result<Self> {
        VarModel::new(raw.coeffs)
    }
}

impl From<VarModel> for VarModelRaw {
    fn from(m: VarModel) -> Self {
        VarModelRaw { coeffs: m.coeffs }
    }
}

impl VarModel {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Config("VAR model needs at least one lag".into()))?;
        let p = first.nrows();
        if p == 0 {
            return Err(Error::Empty("VAR dimension must be positive".into()));
        }
        for (k, b) in coeffs.iter().enumerate() {
            if b.nrows() != p || b.ncols() != p {
                return Err(Error::Dimension(format!(
                    "lag {} matrix is {}x{}, expected {p}x{p}",
                    k + 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("lag {} matrix is not finite", k + 1)));
            }
        }
        Ok(Self { coeffs })
    }

    pub fn var1(b: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![b])
    }

    pub fn zeros(p: usize, d: usize) -> Self {
        Self {
            coeffs: vec![DMatrix::zeros(p, p); d],
        }
    }

    pub fn p(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn d(&self) -> usize {
        self.coeffs.len()
    }

    /// `B_1 … B_d`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Column `j` of every lag matrix stacked into a length `p·d` vector;
    /// the true parameter of the `j`-th column regression.
    pub fn column(&self, j: usize) -> nalgebra::DVector<f64> {
        let p = self.p();
        nalgebra::DVector::from_fn(p * self.d(), |i, _| self.coeffs[i / p][(i % p, j)])
    }

    /// The `(p·d) × (p·d)` matrix `B̃ᵀ` of the equivalent VAR(1).
    pub fn companion(&self) -> DMatrix<f64> {
        let p = self.p();
        let d = self.d();
        let mut c = DMatrix::zeros(p * d, p * d);
        for (k, b) in self.coeffs.iter().enumerate() {
            c.view_mut((0, k * p), (p, p)).copy_from(&b.transpose());
        }
        for k in 1..d {
            c.view_mut((k * p, (k - 1) * p), (p, p))
                .copy_from(&DMatrix::identity(p, p));
        }
        c
    }

    /// Spectral radius of the companion matrix; `< 1` means stable.
    pub fn radius(&self) -> Result<f64> {
        spectral_radius(&self.companion())
    }

    /// `p` rows of `p·d` values, row `i` being `[B_1[i,:] … B_d[i,:]]`,
    /// under a `# varmodel p=<p> d=<d>` header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# varmodel p={} d={}\n", self.p(), self.d());
        for i in 0..self.p() {
            let row: Vec<String> = self
                .coeffs
                .iter()
                .flat_map(|b| b.row(i).iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty model file".into()))?;
        let (mut p, mut d) = (None, None);
        let rest = header
            .trim()
            .strip_prefix("# varmodel")
            .ok_or_else(|| Error::Parse(format!("expected '# varmodel p=.. d=..', got {header:?}")))?;
        for tok in rest.split_whitespace() {
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad header field {tok:?}: {e}")))
            };
            if let Some(v) = tok.strip_prefix("p=") {
                p = Some(parse(v)?);
            } else if let Some(v) = tok.strip_prefix("d=") {
                d = Some(parse(v)?);
            }
        }
        let (p, d) = match (p, d) {
            (Some(p), Some(d)) if p > 0 && d > 0 => (p, d),
            _ => return Err(Error::Parse(format!("header lacks positive p and d: {header:?}"))),
        };
        let mut coeffs = vec![DMatrix::zeros(p, p); d];
        let mut rows = 0;
        for line in lines {
            if rows == p {
                return Err(Error::Parse(format!("more than {p} rows in model file")));
            }
            let vals = line.split(',').map(parse_f64).collect::<Result<Vec<_>>>()?;
            if vals.len() != p * d {
                return Err(Error::Parse(format!(
                    "model row {} has {} values, expected {}",
                    rows + 1,
                    vals.len(),
                    p * d
                )));
            }
            for (c, v) in vals.into_iter().enumerate() {
                coeffs[c / p][(rows, c % p)] = v;
            }
            rows += 1;
        }
        if rows != p {
            return Err(Error::Parse(format!("model file has {rows} rows, expected {p}")));
        }
        Self::new(coeffs)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_csv(&text)
    }
}

/// Free-function form of [`VarModel::companion`].
pub fn companion_matrix(model: &VarModel) -> DMatrix<f64> {
    model.companion()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_single_lag_is_transpose() {
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let m = VarModel::var1(b.clone()).unwrap();
        assert_eq!(m.companion(), b.transpose());
    }

    #[test]
    fn companion_scalar_ar2() {
        let m = VarModel::new(vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.25),
        ])
        .unwrap();
        assert_eq!(m.companion(), DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 1.0, 0.0]));
        // largest root of z² − 0.5z − 0.25
        let root = (0.5 + (0.25f64 + 1.0).sqrt()) / 2.0;
        assert!((m.radius().unwrap() - root).abs() < 1e-10);
        assert!((root - 0.8090).abs() < 1e-4);
    }

    #[test]
    fn companion_layout_three_lags() {
        let coeffs: Vec<_> = (0..3)
            .map(|k| DMatrix::from_fn(2, 2, |i, j| (10 * k + 2 * i + j) as f64))
            .collect();
        let c = VarModel::new(coeffs.clone()).unwrap().companion();
        for k in 0..3 {
            assert_eq!(c.view((0, 2 * k), (2, 2)), coeffs[k].transpose());
        }
        assert_eq!(c.view((2, 0), (2, 2)), DMatrix::<f64>::identity(2, 2));
        assert_eq!(c.view((4, 2), (2, 2)), DMatrix::<f64>::identity(2, 2));
        assert_eq!(c.view((2, 2), (4, 4)).iter().filter(|v| **v != 0.0).count(), 1 + 1);
    }

    #[test]
    fn model_validation() {
        assert!(VarModel::new(vec![]).is_err());
        assert!(VarModel::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)]).is_err());
        assert!(VarModel::new(vec![DMatrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = VarModel::new(vec![
            DMatrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) / 7.0),
            DMatrix::from_fn(3, 3, |i, j| (i * j) as f64 * 0.1),
        ])
        .unwrap();
        let text = m.to_csv();
        assert!(text.starts_with("# varmodel p=3 d=2\n"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 6);
        assert_eq!(VarModel::from_csv(&text).unwrap(), m);
        assert!(VarModel::from_csv("# varmodel p=2 d=1\n1,2\n").is_err());
        assert!(VarModel::from_csv("p=1 d=1\n1\n").is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = VarModel::var1(DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2])).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"coeffs":[[[0.1,0.0],[0.0,0.2]]]}"#);
        assert_eq!(serde_json::from_str::<VarModel>(&s).unwrap(), m);
    }
}
