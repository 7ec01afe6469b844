use std::fmt;

use thiserror::Error;

/// A single violated modelling assumption, located on the grid when possible.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    /// Grid index the violation refers to, if it is pointwise.
    pub index: Option<usize>,
    /// Grid location `t_i`, if pointwise.
    pub location: Option<f64>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.index, self.location) {
            (Some(i), Some(t)) => write!(f, "grid point {i} (t={t}): {}", self.message),
            (Some(i), None) => write!(f, "grid point {i}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid memory function: {0}")]
    InvalidMemory(String),

    #[error("invalid innovation model: {0}")]
    InvalidInnovations(String),

    #[error("validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "tail budget unreachable: d={d} with tail_tol={tail_tol} needs truncation {required:.3e} > cap {cap}; \
         smallest reachable tail_tol at the cap is {suggested_tol:.3e}"
    )]
    TailBudgetUnreachable {
        d: f64,
        tail_tol: f64,
        required: f64,
        cap: u64,
        suggested_tol: f64,
    },

    #[error("outside integrability region: {0}")]
    Integrability(String),

    #[error("asymptotic law not available: {0}")]
    UncoveredRegime(String),

    #[error("CLT not stated for mixed regimes: {0}")]
    MixedRegimes(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("truncation window mismatch: {left} vs {right}")]
    WindowMismatch { left: String, right: String },

    #[error("internal consistency failure: {what} (a={a:e}, b={b:e}, tolerance={tol:e})")]
    Inconsistent {
        what: String,
        a: f64,
        b: f64,
        tol: f64,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
