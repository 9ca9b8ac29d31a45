use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("explicit dependence on x is not allowed here")]
    ExplicitVariable,

    #[error("differential polynomial is not a total derivative: {0}")]
    NotExact(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("vanishing linear factor at series order {order}")]
    Resonance { order: usize },

    #[error("kind-zero series requires a nonzero alpha")]
    ZeroAlpha,

    #[error("point {0} lies on the branch cut and no branch directive was given")]
    Branch(String),

    #[error("transformation is singular at z = 0")]
    Singular,

    #[error("step size collapsed below {floor:e} at x = {x} without blow-up signature")]
    ToleranceFailure { x: String, floor: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
