use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid symplectic form: {0}")]
    InvalidForm(String),

    #[error("invalid rational literal {0:?}")]
    InvalidRational(String),

    #[error("generator list is empty")]
    EmptyGenerators,

    #[error("dependent generators: integer coefficients are not unique")]
    DependentGenerators,

    #[error("not in lattice: {0}")]
    NotInLattice(String),

    #[error("element is zero")]
    ZeroElement,

    #[error("ambient box too small: radius {got} < required {needed}")]
    AmbientTooSmall { needed: u64, got: u64 },

    #[error("{what} of size {size} exceeds the cap of {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },

    #[error("invalid epsilon: {0}")]
    InvalidEpsilon(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not self-adjoint (deviation {0:e})")]
    NotSelfAdjoint(f64),

    #[error("spectrum leaves [0, 1]: eigenvalue {0}")]
    SpectrumOutOfRange(f64),

    #[error("no spectrum near 1: the projection onto [1 - eps, 1] is zero")]
    NoSpectrumNearOne,

    #[error("sample incomplete: missing label {0:?}")]
    MissingLabel(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("lambda must be nonzero")]
    ZeroLambda,

    #[error("cutoff {cutoff} exceeds {limit}")]
    CutoffTooLarge { cutoff: usize, limit: usize },

    #[error("[{relation}] missing parameter {name:?}")]
    MissingParam { relation: String, name: String },

    #[error("[{relation}] {msg}")]
    InvalidParam { relation: String, msg: String },

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("expression is not a {0} element")]
    WrongFamily(&'static str),

    #[error("{0}")]
    Sweep(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
