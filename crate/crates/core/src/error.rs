use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice configuration: {0}")]
    Lattice(String),

    #[error("invalid channel specification: {0}")]
    Channel(String),

    #[error("invalid selection window: {0}")]
    Window(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("kernel inconsistency: {0}")]
    Kernel(String),
}

impl Error {
    /// Stable machine-readable code for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Lattice(_) => "E_LATTICE",
            Error::Channel(_) => "E_CHANNEL",
            Error::Window(_) => "E_WINDOW",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::Eigen(_) => "E_EIGEN",
            Error::Kernel(_) => "E_KERNEL",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
