use thiserror::Error;

/// Errors raised by the integrators, propagators and the convergence harness.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "contraction certificate violated at h = {h:e}: kappa = Omega(h)*C_ell*s*L = {omega:e}*{c_ell}*{s}*{lipschitz} = {kappa} >= 1; reduce h"
    )]
    Contraction {
        h: f64,
        kappa: f64,
        omega: f64,
        c_ell: f64,
        s: usize,
        lipschitz: f64,
    },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {last_increment:e}, tolerance {tolerance:e})")]
    Divergence {
        iterations: usize,
        last_increment: f64,
        tolerance: f64,
    },

    #[error("strip violation at step {step} (t = {t}): distance {distance:e} to the reference exceeds radius {radius:e}")]
    StripViolation {
        step: usize,
        t: f64,
        distance: f64,
        radius: f64,
    },

    #[error("reference solution rejected: {0}")]
    Reference(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Contraction { .. } => 3,
            Error::StripViolation { .. } => 4,
            Error::Divergence { .. } => 5,
            Error::Reference(_) => 6,
        }
    }
}
