use std::collections::BTreeMap;

use super::{SearchSpace, TrainedRecord};
use crate::latency::Latency;

/// Implicit description of the pruned precedents of `anchor`: every
/// `m ≺ anchor` with `latency(m) >= threshold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneCertificate<E> {
    pub anchor: E,
    pub anchor_latency: Latency,
    /// Latency of the fastest trained architecture at least as accurate as the anchor.
    pub threshold: Latency,
}

impl<E> PruneCertificate<E> {
    pub fn covers(&self, m: &E, latency: Latency, precedes: impl Fn(&E, &E) -> bool) -> bool {
        latency >= self.threshold && precedes(m, &self.anchor)
    }
}

/// One certificate per trained architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateSet<E: Ord> {
    certs: BTreeMap<E, PruneCertificate<E>>,
}

impl<E: Ord> Default for CertificateSet<E> {
    fn default() -> Self {
        CertificateSet {
            certs: BTreeMap::new(),
        }
    }
}

impl<E: Ord + Clone> CertificateSet<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certs.is_empty()
    }

    pub fn get(&self, anchor: &E) -> Option<&PruneCertificate<E>> {
        self.certs.get(anchor)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PruneCertificate<E>> {
        self.certs.values()
    }

    /// Recomputes every threshold from `records` and returns the anchors
    /// whose certificate is new or whose threshold dropped.
    pub fn update(&mut self, records: &[TrainedRecord<E>]) -> Vec<E> {
        let mut by_accuracy: Vec<&TrainedRecord<E>> = records.iter().collect();
        by_accuracy.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));

        let mut changed = Vec::new();
        let mut fastest = Latency::MAX;
        let mut i = 0;
        while i < by_accuracy.len() {
            let acc = by_accuracy[i].accuracy;
            let end = i + by_accuracy[i..]
                .iter()
                .take_while(|r| r.accuracy == acc)
                .count();
            let group = &by_accuracy[i..end];
            fastest = group.iter().map(|r| r.latency).fold(fastest, Latency::min);
            for w in group {
                match self.certs.get_mut(&w.code) {
                    Some(cert) => {
                        debug_assert!(fastest <= cert.threshold, "thresholds never rise");
                        if fastest < cert.threshold {
                            cert.threshold = fastest;
                            changed.push(w.code.clone());
                        }
                    }
                    None => {
                        self.certs.insert(
                            w.code.clone(),
                            PruneCertificate {
                                anchor: w.code.clone(),
                                anchor_latency: w.latency,
                                threshold: fastest,
                            },
                        );
                        changed.push(w.code.clone());
                    }
                }
            }
            i = end;
        }
        changed.sort();
        changed
    }

    pub fn prunes(&self, m: &E, latency: Latency, precedes: impl Fn(&E, &E) -> bool) -> bool {
        self.certs.values().any(|c| c.covers(m, latency, &precedes))
    }
}

/// Returns the certificates after folding in `records`.
pub fn update_certificates<E: Ord + Clone>(
    records: &[TrainedRecord<E>],
    mut certificates: CertificateSet<E>,
) -> CertificateSet<E> {
    certificates.update(records);
    certificates
}

/// Whether some certificate covers `m` in `space`.
pub fn is_pruned<S: SearchSpace>(
    m: &S::Element,
    latency: Latency,
    certificates: &CertificateSet<S::Element>,
    space: &S,
) -> bool {
    certificates.prunes(m, latency, |a, b| space.precedes(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::best_faster_or_equal;

    fn rec(code: u32, ns: u64, acc: f64) -> TrainedRecord<u32> {
        TrainedRecord {
            code,
            latency: Latency::from_nanos(ns),
            accuracy: acc,
            iteration: 0,
        }
    }

    #[test]
    fn first_record_anchors_itself() {
        let certs = update_certificates(&[rec(1, 300, 0.69)], CertificateSet::new());
        let c = certs.get(&1).unwrap();
        assert_eq!((c.anchor, c.threshold), (1, Latency::from_nanos(300)));
    }

    #[test]
    fn faster_better_record_lowers_threshold() {
        let mut certs = CertificateSet::new();
        let mut rs = vec![rec(1, 300, 0.69)];
        certs.update(&rs);
        rs.push(rec(2, 200, 0.70));
        let changed = certs.update(&rs);
        assert_eq!(changed, vec![1, 2]);
        assert_eq!(certs.get(&1).unwrap().threshold, Latency::from_nanos(200));
        assert_eq!(certs.get(&2).unwrap().threshold, Latency::from_nanos(200));
        // nothing new: no change reported
        assert!(certs.update(&rs).is_empty());
    }

    #[test]
    fn equal_accuracy_shares_smaller_latency() {
        let certs =
            update_certificates(&[rec(1, 300, 0.7), rec(2, 250, 0.7)], CertificateSet::new());
        assert_eq!(certs.get(&1).unwrap().threshold, Latency::from_nanos(250));
        assert_eq!(certs.get(&2).unwrap().threshold, Latency::from_nanos(250));
    }

    #[test]
    fn thresholds_match_scan() {
        let rs: Vec<_> = (0..40u32)
            .map(|i| {
                rec(
                    i,
                    u64::from((i * 7919) % 101 + 1),
                    f64::from((i * 31) % 13) / 13.0,
                )
            })
            .collect();
        let certs = update_certificates(&rs, CertificateSet::new());
        for w in &rs {
            let y = best_faster_or_equal(w, &rs).unwrap();
            assert_eq!(certs.get(&w.code).unwrap().threshold, y.latency);
        }
    }

    #[test]
    fn coverage_is_weak_on_latency() {
        let cert = PruneCertificate {
            anchor: 10u32,
            anchor_latency: Latency::from_nanos(500),
            threshold: Latency::from_nanos(300),
        };
        let below = |a: &u32, b: &u32| a < b;
        assert!(cert.covers(&5, Latency::from_nanos(300), below));
        assert!(!cert.covers(&5, Latency::from_nanos(299), below));
        assert!(!cert.covers(&11, Latency::from_nanos(400), below));
        assert!(!CertificateSet::<u32>::new().prunes(&5, Latency::MAX, below));
    }
}
