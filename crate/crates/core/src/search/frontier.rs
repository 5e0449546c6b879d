use std::cmp::Ordering;

use super::{TradeoffPoint, TrainedRecord};
use crate::latency::Latency;

/// The trained records nothing beats on both axes: `x` is kept unless some
/// record is strictly faster *and* strictly more accurate.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier<E> {
    /// Ascending latency, then descending accuracy, then code.
    pub members: Vec<TrainedRecord<E>>,
}

impl<E> Frontier<E> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn codes(&self) -> impl Iterator<Item = &E> {
        self.members.iter().map(|r| &r.code)
    }
}

fn display_order<E: Ord>(a: &TrainedRecord<E>, b: &TrainedRecord<E>) -> Ordering {
    a.latency
        .cmp(&b.latency)
        .then(b.accuracy.total_cmp(&a.accuracy))
        .then_with(|| a.code.cmp(&b.code))
}

pub fn frontier<E: Clone + Ord>(records: &[TrainedRecord<E>]) -> Frontier<E> {
    let mut order: Vec<&TrainedRecord<E>> = records.iter().collect();
    order.sort_by_key(|r| r.latency);
    let mut members = Vec::new();
    // best accuracy among records strictly faster than the current group
    let mut best_faster = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let lat = order[i].latency;
        let end = i + order[i..].iter().take_while(|r| r.latency == lat).count();
        let group = &order[i..end];
        members.extend(
            group
                .iter()
                .filter(|r| r.accuracy >= best_faster)
                .map(|r| (*r).clone()),
        );
        for r in group {
            best_faster = best_faster.max(r.accuracy);
        }
        i = end;
    }
    members.sort_by(display_order);
    Frontier { members }
}

/// The fastest record at least as accurate as `w`; ties go to higher
/// accuracy, then the smaller code. `w` itself always qualifies.
pub fn best_faster_or_equal<'a, E: Ord>(
    w: &TrainedRecord<E>,
    records: &'a [TrainedRecord<E>],
) -> Option<&'a TrainedRecord<E>> {
    records
        .iter()
        .filter(|y| y.accuracy >= w.accuracy)
        .min_by(|a, b| display_order(a, b))
}

/// Keeps the most accurate frontier member in each `[k·width, (k+1)·width)` latency bin.
pub fn bin_frontier<E: Clone + Ord>(
    frontier: &Frontier<E>,
    width: Latency,
) -> Vec<TrainedRecord<E>> {
    assert!(!width.is_zero(), "bin width must be positive");
    let mut out: Vec<TrainedRecord<E>> = Vec::new();
    for r in &frontier.members {
        let bin = r.latency().as_nanos() / width.as_nanos();
        match out.last_mut() {
            Some(last) if last.latency.as_nanos() / width.as_nanos() == bin => {
                let better = r
                    .accuracy
                    .total_cmp(&last.accuracy)
                    .then_with(|| last.latency.cmp(&r.latency))
                    .then_with(|| last.code.cmp(&r.code));
                if better == Ordering::Greater {
                    *last = r.clone();
                }
            }
            _ => out.push(r.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, ms: &str, acc: f64) -> TrainedRecord<String> {
        TrainedRecord {
            code: name.to_string(),
            latency: ms.parse().unwrap(),
            accuracy: acc,
            iteration: 0,
        }
    }

    #[test]
    fn small_cases() {
        assert!(frontier::<String>(&[]).is_empty());
        let one = [rec("a", "2", 0.70)];
        assert_eq!(frontier(&one).members, one);
        let two = [rec("a", "2", 0.70), rec("b", "3", 0.69)];
        assert_eq!(frontier(&two).members, vec![two[0].clone()]);
    }

    #[test]
    fn ties_are_kept() {
        // equal latency: neither is strictly faster
        let rs = [rec("a", "2", 0.70), rec("b", "2", 0.60)];
        assert_eq!(frontier(&rs).len(), 2);
        // equal accuracy: neither is strictly more accurate
        let rs = [rec("a", "2", 0.70), rec("b", "3", 0.70)];
        assert_eq!(frontier(&rs).len(), 2);
    }

    #[test]
    fn y_w_cases() {
        let rs = [rec("w", "3", 0.69)];
        assert_eq!(best_faster_or_equal(&rs[0], &rs).unwrap().code, "w");
        let rs = [rec("w", "3", 0.69), rec("y", "2", 0.70)];
        assert_eq!(best_faster_or_equal(&rs[0], &rs).unwrap().code, "y");
        let rs = [
            rec("w", "3", 0.69),
            rec("b", "2", 0.71),
            rec("a", "2", 0.71),
            rec("c", "2", 0.70),
        ];
        assert_eq!(best_faster_or_equal(&rs[0], &rs).unwrap().code, "a");
    }

    #[test]
    fn binning_keeps_best_per_bin() {
        let rs = [
            rec("a", "1.01", 0.50),
            rec("b", "1.05", 0.55),
            rec("c", "1.12", 0.60),
            rec("d", "1.35", 0.65),
        ];
        let f = frontier(&rs);
        let binned = bin_frontier(&f, "0.1".parse().unwrap());
        let codes: Vec<_> = binned.iter().map(|r| r.code.as_str()).collect();
        assert_eq!(codes, ["b", "c", "d"]);
    }
}
