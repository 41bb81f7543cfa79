//! Estimation of the number of spiked eigenvalues of a high-dimensional
//! covariance matrix.
//!
//! The crate provides four layers:
//!
//! * [`mp`] — the Marchenko–Pastur law for aspect ratio `c = p/n`, the
//!   spike-forward map `psi` and its inverse, the integral transforms `m1`
//!   and `m2`, and the penalty bounds (`varphi`, gap margins) that govern
//!   when selection criteria can be consistent.
//! * [`spectra`] — spiked population models, deterministic data sampling,
//!   sample covariance matrices, and their eigenvalues ([`eigen`] holds the
//!   symmetric eigenvalue solver).
//! * [`criteria`] — the model-selection criteria themselves: the fixed-`p`
//!   and diverging-`p` generalized information criteria and the
//!   Bai–Choi–Fujikoshi reference criterion.
//! * [`sim`] — a deterministic Monte Carlo harness that reproduces the
//!   reference simulation tables and checks the limiting laws the criteria
//!   rely on, plus CSV/JSON plumbing in [`io`].

pub mod criteria;
pub mod eigen;
pub mod io;
pub mod mp;
pub mod quad;
pub mod sim;
pub mod spectra;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {quantity} = {value} violates {bound}")]
    Domain {
        quantity: &'static str,
        value: f64,
        bound: String,
    },
    /// An index-like argument is out of range.
    #[error("index error: {quantity} = {value} violates {bound}")]
    Index {
        quantity: &'static str,
        value: usize,
        bound: String,
    },
    /// The iterative eigenvalue solver did not converge.
    #[error("eigenvalue iteration failed to converge ({0})")]
    Convergence(String),
    /// A simulation or estimation configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
    /// A text input (CSV, spectrum file, criterion identifier) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
    /// A replication of a Monte Carlo run failed; wraps the underlying error.
    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, bound: impl Into<String>) -> Self {
        Error::Domain {
            quantity,
            value,
            bound: bound.into(),
        }
    }

    pub(crate) fn index(quantity: &'static str, value: usize, bound: impl Into<String>) -> Self {
        Error::Index {
            quantity,
            value,
            bound: bound.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
