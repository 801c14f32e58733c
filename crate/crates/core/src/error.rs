use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("velocity is not time-like (u·u = {norm})")]
    NonTimelikeVelocity { norm: f64 },

    #[error("sample at s = {s} is off the mass shell (|u·u - 1| = {residual:e})")]
    OffShellSample { s: f64, residual: f64 },

    #[error("history query at s = {query} is beyond the frontier s = {frontier}")]
    FutureQuery { query: f64, frontier: f64 },

    #[error("history query at s = {query} falls in the pruned segment (oldest retained s = {oldest})")]
    PrunedQuery { query: f64, oldest: f64 },

    #[error("samples must be strictly increasing in s (got {next} after {last})")]
    NonMonotonicSample { last: f64, next: f64 },

    #[error("retarded root not bracketed within {horizon} of s = {s}")]
    RootNotBracketed { s: f64, horizon: f64 },

    #[error("retarded root at s' = {s_ret} is not causal (R·u = {ru})")]
    NonCausalRoot { s_ret: f64, ru: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("at least two snapshots are required (got {0})")]
    InsufficientSnapshots(usize),

    #[error("bin {bin} holds {count} particles, fewer than the required {required}")]
    SparseBin {
        bin: usize,
        count: usize,
        required: usize,
    },

    #[error("density {0} is not bounded away from zero")]
    VanishingDensity(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("step at s = {s} failed: {source}")]
    StepFailed { s: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
