use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("radius formula infeasible for epsilon {epsilon} (requires epsilon > ln 2)")]
    InfeasibleRadius { epsilon: f64 },

    #[error("point lies outside the input domain")]
    OutsideDomain,

    #[error("amplification bound not applicable: population {population} is below the minimum {min_population:.3}")]
    AmplificationInfeasible { population: u64, min_population: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Authenticated decryption failed (wrong key or tampered ciphertext).
    #[error("decryption failed")]
    Decryption,

    #[error("decode error at byte {position}: {reason}")]
    Decode { position: usize, reason: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no bulletin entry for this public key")]
    Delivery,

    #[error("round aborted: {failures} envelope(s) failed to open")]
    RoundAborted { failures: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
