use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("bit width mismatch: {left} vs {right}")]
    WidthMismatch { left: u32, right: u32 },

    #[error("bit width {0} outside the supported range 1..=24")]
    UnsupportedWidth(u32),

    #[error("value {value:#x} does not fit in {n} bits")]
    ValueOutOfRange { value: u32, n: u32 },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model {model} cannot be trained with loss {loss}")]
    UnsupportedPairing { model: &'static str, loss: &'static str },

    #[error("cross entropy diverges: model assigns zero mass to observed state {0}")]
    ZeroMassOnObserved(u32),

    #[error("training diverged at step {step}: non-finite {what}")]
    Diverged { step: usize, what: &'static str, trace: alloc::vec::Vec<f64> },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
