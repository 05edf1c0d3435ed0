// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Unknown catalog label.
    #[error("unknown sequence label `{label}`; valid labels: {}", valid.join(", "))]
    UnknownLabel { label: String, valid: Vec<String> },

    /// The time-ordered integrator could not reach the requested tolerance.
    #[error("integration did not converge: achieved {achieved:.3e} with {steps} steps (requested {requested:.3e})")]
    Integration {
        achieved: f64,
        requested: f64,
        steps: usize,
    },

    /// Polynomial/harmonic interpolation is too poorly conditioned for the requested size.
    #[error("coefficient extraction is ill-conditioned (estimated error {estimate:.3e})")]
    Conditioning { estimate: f64 },

    /// Infidelity samples fell below the floating-point floor.
    #[error("precision floor reached: {0}")]
    Precision(String),

    /// Malformed input data (CSV, config files).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
