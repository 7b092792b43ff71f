use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("membership recursion exceeded {cap} distinct pullbacks")]
    DepthExceeded { cap: usize },
    #[error("doubling orbit exceeds guard of {guard} parameters")]
    OrbitOverflow { guard: usize },
    #[error("{what} exceeds cap {cap}")]
    CapExceeded { what: String, cap: usize },
    #[error("point {0} is not on the boundary of the reference triangle")]
    NotOnBoundary(String),
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error("support graph is disconnected")]
    Disconnected,
    #[error("interior block is singular")]
    SingularInterior,
    #[error("target set contains the source vertex")]
    BadTarget,
    #[error("vertex sets do not match")]
    MismatchedVertexSets,
    #[error("bad measure: {0}")]
    BadMeasure(String),
    #[error("negative conductance {value} between {x} and {y}")]
    NegativeConductance { x: usize, y: usize, value: f64 },
    #[error("identification mismatch: {0}")]
    IdentificationMismatch(String),
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("degenerate limit: {0}")]
    DegenerateLimit(String),
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    #[error("relation guard exceeded: {size} boundary points > {guard}")]
    GuardExceeded { size: usize, guard: usize },
    #[error("unknown vertex: {0}")]
    UnknownVertex(String),
    #[error("insufficient scales: {0}")]
    InsufficientScales(String),
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("tracking error: {0}")]
    TrackingError(String),
}

impl Error {
    /// Numerical failures as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::DegenerateLimit(_)
                | Error::BracketFailure(_)
                | Error::SingularInterior
                | Error::NegativeConductance { .. }
                | Error::DepthExceeded { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::DepthExceeded { .. } => "DepthExceeded",
            Error::OrbitOverflow { .. } => "OrbitOverflow",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::NotOnBoundary(_) => "NotOnBoundary",
            Error::BoundViolation(_) => "BoundViolation",
            Error::Disconnected => "Disconnected",
            Error::SingularInterior => "SingularInterior",
            Error::BadTarget => "BadTarget",
            Error::MismatchedVertexSets => "MismatchedVertexSets",
            Error::BadMeasure(_) => "BadMeasure",
            Error::NegativeConductance { .. } => "NegativeConductance",
            Error::IdentificationMismatch(_) => "IdentificationMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateLimit(_) => "DegenerateLimit",
            Error::BracketFailure(_) => "BracketFailure",
            Error::GuardExceeded { .. } => "GuardExceeded",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::InsufficientScales(_) => "InsufficientScales",
            Error::BadWeights(_) => "BadWeights",
            Error::TrackingError(_) => "TrackingError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
