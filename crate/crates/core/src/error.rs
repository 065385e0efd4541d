use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed on edge {edge}: {message}")]
    Integration { edge: usize, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sweep failed at eps = {eps:e}: {source}")]
    Sweep {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable short name, used in service error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MeshMismatch(_) => "mesh_mismatch",
            Error::Domain(_) => "domain",
            Error::Integration { .. } => "integration",
            Error::Numerical(_) => "numerical",
            Error::Inconsistent(_) => "inconsistent",
            Error::Config(_) => "config",
            Error::Sweep { .. } => "sweep",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// Whether the caller's input, rather than the computation, is at fault.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::MeshMismatch(_) | Error::Domain(_) | Error::Config(_) => true,
            Error::Sweep { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
