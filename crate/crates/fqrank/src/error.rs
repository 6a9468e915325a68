use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("field GF({p}^{m}) exceeds the q <= 2^16 cap")]
    DegreeTooLarge { p: u64, m: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("GF({ext_p}^{ext_m}) is not an extension of GF({base_p}^{base_m})")]
    NotAnExtension {
        base_p: u64,
        base_m: u32,
        ext_p: u64,
        ext_m: u32,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mode {0} out of range for order-{1} tensor")]
    ModeOutOfRange(usize, usize),
    #[error("duplicate mode {0} in contraction")]
    DuplicateMode(usize),
    #[error("index {index} out of range for mode {mode} of size {size}")]
    IndexOutOfRange {
        mode: usize,
        index: usize,
        size: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensors have different orders ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("subset of modes must be proper and nonempty")]
    BadSubset,
    #[error("unknown tensor family {0:?}")]
    UnknownFamily(String),
    #[error("bad family parameters: {0}")]
    BadParams(String),
    #[error("enumeration budget exceeded: need {needed} units, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("operation unsupported at tensor order {0}")]
    OrderUnsupported(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("constants C1, C2 must be positive")]
    BadConstants,
    #[error("arguments out of range: {0}")]
    BadRange(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
