use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NoiseRaw {
    StudentT { df: f64 },
    Gaussian { sd: f64 },
    ScaleMixture { components: Vec<(f64, f64)> },
}

/// Distribution of each noise coordinate; coordinates are iid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRaw", into = "NoiseRaw")]
pub enum NoiseSpec {
    /// Student's t with `df > 2` (finite variance); `df` need not be an integer.
    StudentT { df: f64 },
    Gaussian { sd: f64 },
    /// Mixture of centred Gaussians given as `(weight, sd)` pairs.
    ScaleMixture { components: Vec<(f64, f64)> },
}

impl TryFrom<NoiseRaw> for NoiseSpec {
    type Error = Error;

    fn try_from(raw: NoiseRaw) -> Result<Self> {
        match raw {
            NoiseRaw::StudentT { df } => NoiseSpec::student_t(df),
            NoiseRaw::Gaussian { sd } => NoiseSpec::gaussian(sd),
            NoiseRaw::ScaleMixture { components } => NoiseSpec::scale_mixture(components),
        }
    }
}

impl From<NoiseSpec> for NoiseRaw {
    fn from(n: NoiseSpec) -> Self {
        match n {
            NoiseSpec::StudentT { df } => NoiseRaw::StudentT { df },
            NoiseSpec::Gaussian { sd } => NoiseRaw::Gaussian { sd },
            NoiseSpec::ScaleMixture { components } => NoiseRaw::ScaleMixture { components },
        }
    }
}

impl NoiseSpec {
    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 2.0 && df.is_finite()) {
            return Err(Error::Config(format!(
                "student-t degrees of freedom must exceed 2, got {df}"
            )));
        }
        Ok(NoiseSpec::StudentT { df })
    }

    pub fn gaussian(sd: f64) -> Result<Self> {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(Error::Config(format!("gaussian sd must be nonnegative, got {sd}")));
        }
        Ok(NoiseSpec::Gaussian { sd })
    }

    pub fn standard_gaussian() -> Self {
        NoiseSpec::Gaussian { sd: 1.0 }
    }

    pub fn scale_mixture(components: Vec<(f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("scale mixture needs components".into()));
        }
        if components
            .iter()
            .any(|&(w, sd)| !(w >= 0.0 && w.is_finite() && sd >= 0.0 && sd.is_finite()))
        {
            return Err(Error::Config("mixture weights and sds must be nonnegative".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(NoiseSpec::ScaleMixture { components })
    }

    pub fn sampler(&self) -> NoiseSampler {
        match self {
            NoiseSpec::StudentT { df } => NoiseSampler::StudentT {
                df: *df,
                chi: ChiSquared::new(*df).expect("df validated at construction"),
            },
            NoiseSpec::Gaussian { sd } => NoiseSampler::Gaussian { sd: *sd },
            NoiseSpec::ScaleMixture { components } => NoiseSampler::Mixture {
                components: components.clone(),
            },
        }
    }
}

/// Prepared sampler for a [`NoiseSpec`].
#[derive(Debug, Clone)]
pub enum NoiseSampler {
    StudentT { df: f64, chi: ChiSquared<f64> },
    Gaussian { sd: f64 },
    Mixture { components: Vec<(f64, f64)> },
}

impl NoiseSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            // t = N(0,1) / sqrt(χ²_df / df)
            NoiseSampler::StudentT { df, chi } => {
                let z: f64 = rng.sample(StandardNormal);
                let v: f64 = chi.sample(rng);
                z / (v / df).sqrt()
            }
            NoiseSampler::Gaussian { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            NoiseSampler::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut sd = components.last().map_or(0.0, |c| c.1);
                for &(w, s) in components {
                    acc += w;
                    if u < acc {
                        sd = s;
                        break;
                    }
                }
                sd * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }
}

/// `rows × cols` iid draws, filled row by row.
pub fn sample_noise<R: Rng + ?Sized>(
    spec: &NoiseSpec,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let sampler = spec.sampler();
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = sampler.draw(rng);
        }
    }
    out
}
