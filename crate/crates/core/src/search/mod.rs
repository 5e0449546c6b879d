//! Partial order pruning search.
//!
//! The engine samples untrained, unpruned members of a space, asks an
//! evaluator for their accuracy and keeps one prune certificate per trained
//! architecture `w`: every strict precedent of `w` whose latency is at least
//! that of the fastest trained architecture no less accurate than `w` is
//! taken out of the candidate pool without being evaluated.

mod assumption;
mod certificates;
mod engine;
mod frontier;
mod spaces;

use std::fmt;

use thiserror::Error;

use crate::latency::{Latency, MissingKey};

pub use assumption::{check_assumption, AssumptionReport, AssumptionSummary, PairDelta};
pub use certificates::{is_pruned, update_certificates, CertificateSet, PruneCertificate};
pub use engine::{
    pop_search, HistoryEntry, SearchConfig, SearchError, SearchOutcome, SearchStatistics,
    SelectionStrategy, StopReason,
};
pub use frontier::{best_faster_or_equal, bin_frontier, frontier, Frontier};
pub use spaces::{BackboneSpace, DecoderLatencySource, DecoderSpace};

/// A latency/accuracy point.
pub trait TradeoffPoint {
    fn latency(&self) -> Latency;
    fn accuracy(&self) -> f64;
}

/// An evaluated architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRecord<E> {
    pub code: E,
    pub latency: Latency,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
    /// 1-based evaluation order; row order for records read from a file.
    pub iteration: usize,
}

impl<E> TradeoffPoint for TrainedRecord<E> {
    fn latency(&self) -> Latency {
        self.latency
    }

    fn accuracy(&self) -> f64 {
        self.accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error(transparent)]
    Missing(#[from] MissingKey),
    #[error("no latency recorded for {0}")]
    Unpriced(String),
}

/// What the engine needs from a search space.
///
/// `precedes` must be a strict partial order and `latency` deterministic.
/// A space either exposes its members (`elements`) or can draw seeded
/// samples (`sample`); the engine prefers the former.
pub trait SearchSpace {
    type Element: Clone + Ord + fmt::Display + fmt::Debug + Send + Sync;

    fn contains(&self, element: &Self::Element) -> bool;

    fn precedes(&self, lower: &Self::Element, upper: &Self::Element) -> bool;

    fn latency(&self, element: &Self::Element) -> Result<Latency, SpaceError>;

    /// All members in a fixed order, when the space is materialized.
    fn elements(&self) -> Option<&[Self::Element]> {
        None
    }

    /// A random candidate (not necessarily a member; the engine filters with `contains`).
    fn sample(&self, _rng: &mut dyn rand::RngCore) -> Option<Self::Element> {
        None
    }
}
