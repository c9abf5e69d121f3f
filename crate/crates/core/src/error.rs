use thiserror::Error;

/// Errors produced by the estimation, simulation and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{criterion} violated: computed radius {radius:.6} is not below 1")]
    Unstable { criterion: String, radius: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("rescaling undefined for a matrix with zero spectral radius")]
    ZeroRadius,

    #[error("non-finite iterate at optimizer iteration {iteration} (step {step} too large?)")]
    Divergence { iteration: usize, step: f64 },

    #[error("column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite state at simulation step {step}")]
    Explosive { step: usize },

    #[error("{0}")]
    Generation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag used on the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Empty(_) => "empty",
            Error::Unstable { .. } => "unstable",
            Error::EigenNoConvergence { .. } => "eigen",
            Error::ZeroRadius => "zero-radius",
            Error::Divergence { .. } => "divergence",
            Error::Column { source, .. } => source.kind(),
            Error::Explosive { .. } => "explosive",
            Error::Generation(_) => "generation",
            Error::Parse(_) => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
