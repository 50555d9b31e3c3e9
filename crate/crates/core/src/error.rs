//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("matrix not positive semidefinite: pivot {pivot:.3e} at index {index} (tolerance {tol:.3e})")]
    NotPsd { pivot: f64, index: usize, tol: f64 },

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error("superadditivity violated at pair ({n}, {m}): Q_{n} + Q_{m} = {sum:.6e} > Q_{total} = {whole:.6e}")]
    SuperadditivityViolated {
        n: usize,
        m: usize,
        total: usize,
        sum: f64,
        whole: f64,
    },

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
