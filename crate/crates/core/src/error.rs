use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("universe too large: {0}")]
    UniverseTooLarge(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("table length {got} does not match state count {expected}")]
    TableLength { expected: usize, got: usize },

    #[error("every entry of the log-mass table is -inf or NaN (numerical collapse)")]
    NumericalCollapse,

    #[error("belief tables are defined over identity-only densities (N = 0, no reference bit)")]
    DataBearingDensity,

    #[error("inconsistent belief table: recovered mass {mass:e} at set {mask:#x}")]
    InconsistentBelief { mask: u32, mass: f64 },

    #[error("densities have overlapping ground sets: {0}")]
    OverlappingSupport(String),

    #[error("densities live on different universes")]
    UniverseMismatch,

    #[error("taps {taps:#x} are not primitive: period {period}, expected {expected}")]
    NotPrimitive { taps: u32, period: usize, expected: usize },

    #[error("small-set Kasami sequences need an even degree, got {0}")]
    OddDegree(u32),

    #[error("signature correlation matrix is not positive definite (linearly dependent signatures)")]
    SingularCorrelation,

    #[error("pairwise error probability is undefined for identical hypotheses")]
    IdenticalHypotheses,

    #[error("open-eye condition not met for any frame length up to {0}")]
    OpenEyeCapExceeded(usize),

    #[error("stationary activity undefined: per-user chain is absorbing (alpha = 0, mu = 1)")]
    AbsorbingChain,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incompatible scenario and detector: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
