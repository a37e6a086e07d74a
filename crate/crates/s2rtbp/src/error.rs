use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("collision singularity at ({q1}, {q2})")]
    Collision { q1: f64, q2: f64 },
    #[error("at projection point (1 - xi0 = {gap:e})")]
    ProjectionPoint { gap: f64 },
    #[error("south pole has no stereographic image")]
    SouthPole,
    #[error("state off the constraint manifold (|xi| - 1 = {norm_gap:e}, xi.eta = {dot:e})")]
    OffConstraint { norm_gap: f64, dot: f64 },
    #[error("region not enclosed at this resolution")]
    NotEnclosed,
    #[error("alpha too small at this point (leading coefficient {leading:e})")]
    AlphaTooSmall { leading: f64 },
    #[error("outside Hill region (U - c = {excess:e})")]
    OutsideHillRegion { excess: f64 },
    #[error("empty region")]
    EmptyRegion,
    #[error("energy {c} outside the admissible range: {reason}")]
    EnergyOutOfRange { c: f64, reason: &'static str },
    #[error("denominator underflow in {term}")]
    DenominatorUnderflow { term: &'static str },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("constraint drift {drift:e} exceeds limit")]
    ConstraintDrift { drift: f64 },
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unknown figure id `{id}`; valid ids: {valid}")]
    UnknownFigure { id: String, valid: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
