//! Lookup-table latency model.
//!
//! Latencies are held as integer nanoseconds so that whole-network
//! estimates are exact sums, independent of summation order.

mod enumerate;
mod synthetic;
mod table;

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{enumerate_subspace, EnumerateError, SubspaceQuery};
pub use synthetic::SyntheticTable;
pub use table::{
    estimate_latency, AuditReport, LatencyTable, MissingKey, MonotonicityViolation, TableError,
    TableMeta,
};

const NS_PER_MS: u64 = 1_000_000;

/// A duration in nanoseconds, read and written as decimal milliseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Latency(u64);

impl Latency {
    pub const ZERO: Latency = Latency(0);
    pub const MAX: Latency = Latency(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        Latency(ns)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn from_ms_f64(ms: f64) -> Option<Self> {
        if !ms.is_finite() || ms < 0.0 {
            return None;
        }
        let ns = (ms * NS_PER_MS as f64).round();
        (ns < u64::MAX as f64).then_some(Latency(ns as u64))
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / NS_PER_MS as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Signed difference `self - other` in milliseconds.
    pub fn delta_ms(self, other: Latency) -> f64 {
        (self.0 as i128 - other.0 as i128) as f64 / NS_PER_MS as f64
    }
}

impl Add for Latency {
    type Output = Latency;
    fn add(self, rhs: Latency) -> Latency {
        Latency(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Latency {
    type Output = Latency;
    fn sub(self, rhs: Latency) -> Latency {
        Latency(self.0.saturating_sub(rhs.0))
    }
}

impl Sum for Latency {
    fn sum<I: Iterator<Item = Latency>>(iter: I) -> Latency {
        iter.fold(Latency::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid latency `{0}`")]
pub struct LatencyParseError(pub String);

impl FromStr for Latency {
    type Err = LatencyParseError;

    /// Plain decimals are converted exactly (rounded past nanoseconds);
    /// anything else goes through `f64`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || LatencyParseError(s.to_string());
        if matches!(t, "inf" | "infinity" | "∞") {
            return Ok(Latency::MAX);
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let plain = !int.is_empty() || !frac.is_empty();
        if plain
            && int.bytes().all(|b| b.is_ascii_digit())
            && frac.bytes().all(|b| b.is_ascii_digit())
        {
            let whole: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let mut ns: u64 = 0;
            let mut scale = NS_PER_MS / 10;
            for (i, d) in frac.bytes().enumerate() {
                let d = u64::from(d - b'0');
                if i < 6 {
                    ns += d * scale;
                    scale /= 10;
                } else {
                    if i == 6 && d >= 5 {
                        ns += 1;
                    }
                    break;
                }
            }
            return whole
                .checked_mul(NS_PER_MS)
                .and_then(|w| w.checked_add(ns))
                .map(Latency)
                .ok_or_else(bad);
        }
        let ms: f64 = t.parse().map_err(|_| bad())?;
        Latency::from_ms_f64(ms).ok_or_else(bad)
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Latency::MAX {
            return f.write_str("inf");
        }
        let whole = self.0 / NS_PER_MS;
        let frac = self.0 % NS_PER_MS;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

/// Inclusive latency interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBand {
    pub min: Latency,
    pub max: Latency,
}

impl LatencyBand {
    pub fn new(min: Latency, max: Latency) -> Option<Self> {
        (min <= max).then_some(LatencyBand { min, max })
    }

    pub fn unbounded() -> Self {
        LatencyBand {
            min: Latency::ZERO,
            max: Latency::MAX,
        }
    }

    pub fn contains(&self, latency: Latency) -> bool {
        self.min <= latency && latency <= self.max
    }
}

impl FromStr for LatencyBand {
    type Err = String;

    /// `lo,hi` in milliseconds; `hi` may be `inf`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("band `{s}` is not `lo,hi`"))?;
        let lo: Latency = lo.parse().map_err(|e: LatencyParseError| e.to_string())?;
        let hi: Latency = hi.parse().map_err(|e: LatencyParseError| e.to_string())?;
        LatencyBand::new(lo, hi).ok_or_else(|| format!("band `{s}` has lo > hi"))
    }
}

impl fmt::Display for LatencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.min, self.max)
    }
}
