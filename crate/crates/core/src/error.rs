use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("correlation is signaling (worst violation {violation:e} at {location})")]
    Signaling { violation: f64, location: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid wiring: {0}")]
    InvalidWiring(String),

    #[error("invalid classical-quantum state: {0}")]
    InvalidCqState(String),

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("register `{0}` appears in more than one slot")]
    OverlappingRegisters(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("protocol configuration error: {0}")]
    InvalidConfig(String),

    #[error("protocol aborted: empirical win probability {empirical_win} below threshold")]
    Aborted { empirical_win: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    domain: &'static str,
) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfRange {
            name,
            value,
            domain,
        });
    }
    Ok(())
}
