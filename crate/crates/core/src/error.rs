use thiserror::Error;

/// Errors raised by the loopfiber toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fiber dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("all input vectors are zero")]
    AllZero,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("filtration generators are rank deficient: smallest Gram singular value {min_singular:e}")]
    RankDeficient { min_singular: f64 },

    #[error("W ∩ zW⊥ has dimension {found}, expected {expected}")]
    IntersectionDimension { expected: usize, found: usize },

    #[error("pointwise unitarity violated: defect {defect:e} at θ = {theta}")]
    UnitarityViolation { defect: f64, theta: f64 },

    #[error("phase step {step} exceeds π/2 after refining to {grid} points")]
    PhaseStepTooLarge { step: f64, grid: usize },

    #[error("connection value is not anti-Hermitian: defect {defect:e} at t = {t}")]
    NotAntiHermitian { defect: f64, t: f64 },

    #[error("connection expects chart dimension {expected}, loop has {found}")]
    ChartDimension { expected: usize, found: usize },

    #[error("grid size {0} is too small (need at least 16)")]
    GridTooSmall(usize),

    #[error("t = {t} is not a point of the {grid}-point grid")]
    OffGrid { t: f64, grid: usize },

    #[error("expected a scalar loop (n = 1), found n = {0}")]
    NonScalar(usize),

    #[error("twisted section is not quasi-periodic: Φ(σ)(1) - Φ(σ)(0) has norm {residual:e}")]
    PeriodicityDefect { residual: f64 },

    #[error("section and transport frame do not share a base loop and grid")]
    FrameMismatch,

    #[error("reduced transition on edge ({from}, {to}) varies by {variation:e}; det-winding obstruction {obstruction}")]
    NonConstantReducedTransition {
        from: usize,
        to: usize,
        variation: f64,
        obstruction: i64,
    },

    #[error("family fails the Fourier decomposition audit at point {0}")]
    AuditFailed(usize),

    #[error("inconsistent cocycle: {0}")]
    InconsistentCocycle(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
