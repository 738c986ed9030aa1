use thiserror::Error;

/// Errors surfaced by the estimation library and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An angle operation received NaN or infinity, which indicates corrupted
    /// state upstream rather than a recoverable condition.
    #[error("non-finite angle: {0}")]
    NonFiniteAngle(f64),

    /// A covariance matrix lost positive semidefiniteness beyond numerical
    /// tolerance.
    #[error("covariance collapsed: min eigenvalue {min_eig:e}")]
    CovarianceCollapse { min_eig: f64 },

    #[error("invalid timestep dt = {0}")]
    InvalidTimestep(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Innovation covariance is singular; the caller should skip the update
    /// and keep the prior belief.
    #[error("singular innovation covariance")]
    SingularInnovation,

    /// A cooperative packet arrived out of order or duplicated.
    #[error("stale packet: stamp {stamp} not newer than {last}")]
    StalePacket { stamp: f64, last: f64 },

    #[error("observer pose outside world bounds")]
    ObserverOutsideWorld,

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    /// A stamped stream violated its ordering contract (e.g. two encoder
    /// samples with identical stamps fed to the extrapolator).
    #[error("invalid stream: {0}")]
    InvalidStream(String),

    /// Scenario configuration violation, reported with the offending field
    /// path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed log file `{path}`: {message}")]
    MalformedLog { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
