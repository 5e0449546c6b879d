//! A stand-in for training: accuracy grows with total log-width.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EvalError, Evaluator};
use crate::arch::ArchitectureCode;
use crate::decoder::DecoderCode;

/// Capacity proxy: `Σ log2(width) / 10` over every searchable width.
///
/// Adding a block or widening one strictly increases it.
pub trait CapacityMass {
    fn capacity_mass(&self) -> f64;
}

impl CapacityMass for ArchitectureCode {
    fn capacity_mass(&self) -> f64 {
        self.widths().map(|w| f64::from(w).log2()).sum::<f64>() / 10.0
    }
}

impl CapacityMass for DecoderCode {
    fn capacity_mass(&self) -> f64 {
        self.cc().iter().map(|&w| f64::from(w).log2()).sum::<f64>() / 10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOracleParams {
    pub a_max: f64,
    pub gamma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticOracleParams {
    fn default() -> Self {
        SyntheticOracleParams {
            a_max: 0.8,
            gamma: 0.05,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticOracleParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a_max > 0.0 && self.a_max <= 1.0) {
            return Err(format!("a_max must lie in (0, 1], got {}", self.a_max));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

/// Standard normal draw keyed by `(seed, text)`.
fn keyed_normal(seed: u64, text: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    StandardNormal.sample(&mut ChaCha8Rng::from_seed(key))
}

/// `a_max · (1 − exp(−γ · mass))` plus keyed Gaussian noise, clamped to `[0, 1]`.
pub fn synthetic_accuracy<C: CapacityMass + ToString + ?Sized>(
    code: &C,
    params: &SyntheticOracleParams,
) -> f64 {
    let clean = params.a_max * (1.0 - (-params.gamma * code.capacity_mass()).exp());
    let noisy = if params.noise_sigma > 0.0 {
        clean + params.noise_sigma * keyed_normal(params.seed, &code.to_string())
    } else {
        clean
    };
    noisy.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticOracle {
    pub params: SyntheticOracleParams,
}

impl SyntheticOracle {
    pub fn new(params: SyntheticOracleParams) -> Result<Self, String> {
        params.validate()?;
        Ok(SyntheticOracle { params })
    }
}

impl<C: CapacityMass + ToString> Evaluator<C> for SyntheticOracle {
    fn evaluate(&self, element: &C) -> Result<f64, EvalError> {
        Ok(synthetic_accuracy(element, &self.params))
    }

    fn concurrency_safe(&self) -> bool {
        true
    }
}
