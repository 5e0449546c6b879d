//! Latency-constrained architecture search with partial order pruning.
//!
//! Backbones are described by per-stage width lists ([`arch`]); two codes
//! are comparable when one is a shrunk copy of the other ([`order`]).
//! Latencies come from per-layer lookup tables ([`latency`]), and the
//! search ([`search`]) skips every architecture that is provably no better
//! than something already trained.

pub mod arch;
pub mod cli;
pub mod decoder;
pub mod eval;
pub mod latency;
pub mod order;
pub mod records;
pub mod search;

pub use arch::{ArchitectureCode, BlockConfig, BlockKind, LayerKind, Stem, WidthAlphabet};
pub use decoder::DecoderCode;
pub use latency::{Latency, LatencyBand, LatencyTable};
pub use order::precedes;
