//! Penalty norms, their duals and proximal operators.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of `{0, …, q−1}` into disjoint nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Groups {
    blocks: Vec<Vec<usize>>,
    dim: usize,
}

impl TryFrom<Vec<Vec<usize>>> for Groups {
    type Error = Error;

    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Groups::new(blocks)
    }
}

impl From<Groups> for Vec<Vec<usize>> {
    fn from(g: Groups) -> Self {
        g.blocks
    }
}

impl Groups {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let dim: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; dim];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::Config("empty group".into()));
            }
            for &i in block {
                if i >= dim || seen[i] {
                    return Err(Error::Config(format!(
                        "groups must partition 0..{dim}; index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(Self { blocks, dim })
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&s| {
                let b: Vec<usize> = (start..start + s).collect();
                start += s;
                b
            })
            .collect();
        Self::new(blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "groups cover {} coordinates but vector has {}",
                self.dim,
                v.len()
            )));
        }
        Ok(())
    }

    fn block_norms<'a>(&'a self, v: &'a DVector<f64>) -> impl Iterator<Item = f64> + 'a {
        self.blocks
            .iter()
            .map(move |b| b.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt())
    }
}

/// Penalty `R(·)`: the ℓ1 norm or the group ℓ2,1 norm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    #[default]
    L1,
    Group(Groups),
}

impl Penalty {
    pub fn value(&self, v: &DVector<f64>) -> Result<f64> {
        match self {
            Penalty::L1 => Ok(v.iter().map(|x| x.abs()).sum()),
            Penalty::Group(g) => {
                g.check(v)?;
                Ok(g.block_norms(v).sum())
            }
        }
    }

    /// Dual norm: ℓ∞ for ℓ1, the max block norm for the group norm.
    pub fn dual(&self, v: &DVector<f64>) -> Result<f64> {
        match self {
            Penalty::L1 => Ok(v.amax()),
            Penalty::Group(g) => {
                g.check(v)?;
                Ok(g.block_norms(v).fold(0.0, f64::max))
            }
        }
    }

    /// `argmin_z ½||z − v||² + alpha·R(z)`.
    pub fn prox(&self, v: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
        match self {
            Penalty::L1 => soft_threshold(v, alpha),
            Penalty::Group(_) => group_soft_threshold(v, self, alpha),
        }
    }

    pub fn check_dim(&self, q: usize) -> Result<()> {
        match self {
            Penalty::Group(g) if g.dim != q => Err(Error::Dimension(format!(
                "groups cover {} coordinates but problem has {q}",
                g.dim
            ))),
            _ => Ok(()),
        }
    }
}

pub fn penalty_value(pen: &Penalty, v: &DVector<f64>) -> Result<f64> {
    pen.value(v)
}

pub fn dual_value(pen: &Penalty, v: &DVector<f64>) -> Result<f64> {
    pen.dual(v)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must be nonnegative, got {alpha}")))
    }
}

#[inline]
pub(crate) fn shrink(x: f64, alpha: f64) -> f64 {
    let m = x.abs() - alpha;
    if m > 0.0 {
        x.signum() * m
    } else {
        0.0
    }
}

/// Coordinatewise `sign(v_j)·(|v_j| − alpha)_+`.
pub fn soft_threshold(v: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("soft threshold of non-finite vector".into()));
    }
    Ok(v.map(|x| shrink(x, alpha)))
}

/// Blockwise `v_G · (1 − alpha/||v_G||)_+`.
pub fn group_soft_threshold(v: &DVector<f64>, pen: &Penalty, alpha: f64) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    let Penalty::Group(groups) = pen else {
        return Err(Error::Config("group soft threshold needs a group penalty".into()));
    };
    groups.check(v)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("soft threshold of non-finite vector".into()));
    }
    let mut out = DVector::zeros(v.len());
    for (block, norm) in groups.blocks.iter().zip(groups.block_norms(v)) {
        if norm > alpha {
            let scale = 1.0 - alpha / norm;
            for &i in block {
                out[i] = v[i] * scale;
            }
        }
    }
    Ok(out)
}
