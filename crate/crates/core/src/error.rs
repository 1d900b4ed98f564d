use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interface: {0}")]
    InvalidInterface(String),
    #[error("gauge is singular at the interface center")]
    GaugeSingular,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("jump sign violated: need a1 > a2 > 0 (got a1 = {a1}, a2 = {a2})")]
    JumpSign { a1: f64, a2: f64 },
    #[error("time {t} outside the clamped interval |t| <= {limit}")]
    TimeSingular { t: f64, limit: f64 },
    #[error("degenerate epsilon pair: the two centers coincide")]
    DegeneratePair,
    #[error("invalid time step: {0}")]
    InvalidStep(String),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("time extension mismatch at t = 0: {0}")]
    Extension(String),
    #[error("invalid boundary trace: {0}")]
    InvalidTrace(String),
    #[error("Carleman inequality violated: rhs = 0 while lhs = {lhs}")]
    InequalityViolation { lhs: f64 },
    #[error("|R(x, 0)| = {min} falls below r0 = {r0}")]
    SingularR0 { min: f64, r0: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
