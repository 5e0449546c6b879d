use serde::Serialize;

use super::TrainedRecord;

/// Differences `upper - lower` for one comparable pair of trained records.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDelta<E> {
    pub lower: E,
    pub upper: E,
    pub delta_latency_ms: f64,
    pub delta_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionSummary {
    pub pairs: usize,
    /// Share of pairs where the larger architecture is less accurate.
    pub accuracy_violation_fraction: f64,
    /// Share of pairs where the larger architecture is faster.
    pub latency_violation_fraction: f64,
    pub min_delta_accuracy: Option<f64>,
    pub min_delta_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<E> {
    pub pairs: Vec<PairDelta<E>>,
    pub summary: AssumptionSummary,
}

/// Checks on every ordered pair `lower ≺ upper` whether accuracy and latency
/// grow with the order.
pub fn check_assumption<E: Clone>(
    records: &[TrainedRecord<E>],
    precedes: impl Fn(&E, &E) -> bool,
) -> AssumptionReport<E> {
    let mut pairs = Vec::new();
    let mut acc_violations = 0usize;
    let mut lat_violations = 0usize;
    for lo in records {
        for hi in records {
            if !precedes(&lo.code, &hi.code) {
                continue;
            }
            if hi.accuracy < lo.accuracy {
                acc_violations += 1;
            }
            if hi.latency < lo.latency {
                lat_violations += 1;
            }
            pairs.push(PairDelta {
                lower: lo.code.clone(),
                upper: hi.code.clone(),
                delta_latency_ms: hi.latency.delta_ms(lo.latency),
                delta_accuracy: hi.accuracy - lo.accuracy,
            });
        }
    }
    let n = pairs.len();
    let fraction = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let summary = AssumptionSummary {
        pairs: n,
        accuracy_violation_fraction: fraction(acc_violations),
        latency_violation_fraction: fraction(lat_violations),
        min_delta_accuracy: pairs.iter().map(|p| p.delta_accuracy).reduce(f64::min),
        min_delta_latency_ms: pairs.iter().map(|p| p.delta_latency_ms).reduce(f64::min),
    };
    AssumptionReport { pairs, summary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::Latency;

    fn rec(code: u32, ns: u64, acc: f64) -> TrainedRecord<u32> {
        TrainedRecord {
            code,
            latency: Latency::from_nanos(ns),
            accuracy: acc,
            iteration: 0,
        }
    }

    #[test]
    fn counts_violations() {
        // divisibility as the order: 1 ≺ 2 ≺ 4, 1 ≺ 3
        let rs = [
            rec(1, 100, 0.5),
            rec(2, 200, 0.6),
            rec(3, 90, 0.7),
            rec(4, 300, 0.55),
        ];
        let divides = |a: &u32, b: &u32| a != b && b.is_multiple_of(*a);
        let r = check_assumption(&rs, divides);
        assert_eq!(r.summary.pairs, 4);
        // 2≺4 loses accuracy; 1≺3 gains speed
        assert_eq!(r.summary.accuracy_violation_fraction, 0.25);
        assert_eq!(r.summary.latency_violation_fraction, 0.25);
        assert!((r.summary.min_delta_accuracy.unwrap() + 0.05).abs() < 1e-12);
        assert!((r.summary.min_delta_latency_ms.unwrap() + 0.00001).abs() < 1e-12);
    }

    #[test]
    fn no_pairs() {
        let r = check_assumption(&[rec(1, 1, 0.1)], |_: &u32, _: &u32| false);
        assert_eq!(r.summary.pairs, 0);
        assert_eq!(r.summary.accuracy_violation_fraction, 0.0);
        assert_eq!(r.summary.min_delta_accuracy, None);
    }
}
