use thiserror::Error;

/// Errors surfaced by the verification library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A requested index range is empty (e.g. R operators for m = 2).
    /// Distinct from `InvalidArgument`: the request is well-formed but
    /// addresses a family with no members.
    #[error("empty range: {0}")]
    EmptyRange(String),

    /// A configured resource cap would be exceeded.
    #[error("resource cap exceeded: {what} requires {required}, cap is {cap}{}",
            hint.as_deref().map(|h| format!(" ({h})")).unwrap_or_default())]
    ResourceLimit {
        what: String,
        required: u128,
        cap: u128,
        hint: Option<String>,
    },

    /// A numerical pre- or post-condition failed beyond tolerance.
    #[error("contract violation in {check}: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ContractViolation {
        check: String,
        residual: f64,
        tol: f64,
    },

    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// External input failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A quantity that must be real carried a non-negligible imaginary part,
    /// or some other numerical sanity check failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The state has no usable diagonal reference component.
    #[error("degenerate state: {0}")]
    DegenerateState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
