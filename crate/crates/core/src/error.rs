use thiserror::Error;

/// Errors produced by mesh construction, assembly, solving and the study drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown element id {0}")]
    UnknownElement(u64),

    #[error("unknown facet id {0}")]
    UnknownFacet(u64),

    #[error("refinement depth limit reached (max level {0})")]
    DepthLimit(u8),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("problem has no exact solution")]
    MissingExactSolution,

    #[error("facet {0} is not on the required boundary part")]
    WrongBoundary(u64),

    #[error("matrix is singular (zero pivot at unknown {pivot})")]
    Singular { pivot: usize },

    #[error("solver did not reach the residual bound: residual history {history:?}")]
    NotConverged { history: Vec<f64> },

    #[error("meshes do not match: {0}")]
    MeshMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
