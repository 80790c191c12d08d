use thiserror::Error;

/// Errors raised across the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Stokes vector has non-positive intensity s0 = {0}")]
    ZeroIntensity(f64),
    #[error("incidence angle {0} rad is outside [0, pi/2)")]
    InvalidAngle(f64),
    #[error("total internal reflection at {theta} rad for index ratio {eta}")]
    TotalInternalReflection { eta: f64, theta: f64 },
    #[error("polarization frame is undefined for this geometry")]
    DegenerateFrame,
    #[error("grazing geometry: cos(theta_i)*cos(theta_o) = {0:e}")]
    GrazingAngle(f64),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("matrix is rank deficient (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },
    #[error("no histogram bin exceeds the noise floor")]
    NoPeak,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
