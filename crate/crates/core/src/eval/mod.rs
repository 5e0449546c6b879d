//! Accuracy oracles.

mod external;
mod replay;
mod synthetic;

use std::io;
use std::time::Duration;

use thiserror::Error;

pub use external::ExternalCommand;
pub use replay::ReplayEvaluator;
pub use synthetic::{synthetic_accuracy, CapacityMass, SyntheticOracle, SyntheticOracleParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no recorded accuracy for {0}")]
    MissingRecord(String),
    #[error("could not start `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("command exited with {status}\nstdout: {stdout}\nstderr: {stderr}")]
    NonZeroExit {
        status: String,
        stdout: String,
        stderr: String,
    },
    #[error("command timed out after {timeout:?}\nstdout: {stdout}\nstderr: {stderr}")]
    Timeout {
        timeout: Duration,
        stdout: String,
        stderr: String,
    },
    #[error("cannot read an accuracy from command output `{output}`")]
    Unparseable { output: String },
    #[error("accuracy {0} is outside [0, 1]")]
    OutOfRange(f64),
}

/// Maps an element to its accuracy, a fraction in `[0, 1]`.
///
/// Implementations must be deterministic for a fixed configuration.
pub trait Evaluator<E: ?Sized> {
    fn evaluate(&self, element: &E) -> Result<f64, EvalError>;

    /// Whether `evaluate` may run on several elements at once.
    fn concurrency_safe(&self) -> bool {
        false
    }
}

impl<E: ?Sized, F: Fn(&E) -> f64> Evaluator<E> for F {
    fn evaluate(&self, element: &E) -> Result<f64, EvalError> {
        Ok(self(element))
    }
}

/// Reads an accuracy written either as a fraction (`0.698`) or a percentage (`69.8%`).
pub fn parse_accuracy(text: &str) -> Option<f64> {
    let t = text.trim();
    let value = match t.strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().ok()? / 100.0,
        None => t.parse::<f64>().ok()?,
    };
    (value.is_finite() && (0.0..=1.0).contains(&value)).then_some(value)
}
