//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use popnas::arch::{ArchitectureCode, BlockKind, Stem, WidthAlphabet, STAGES};
use popnas::latency::{
    estimate_latency, Latency, LatencyBand, LatencyTable, SubspaceQuery, SyntheticTable,
};
use popnas::order::elementary_shrinks;
use popnas::search::TrainedRecord;
use rand::Rng;

/// Every non-decreasing sequence of `len` widths.
fn monotone_sequences(widths: &[u32], len: usize) -> Vec<Vec<u32>> {
    fn go(widths: &[u32], len: usize, from: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in from..widths.len() {
            cur.push(widths[i]);
            go(widths, len, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(widths, len, 0, &mut Vec::new(), &mut out);
    out
}

/// All codes with 1..=cap blocks per stage, built without any pruning.
pub fn all_codes(
    alphabet: &WidthAlphabet,
    kinds: [BlockKind; STAGES],
    cap: usize,
) -> Vec<ArchitectureCode> {
    let mut out = Vec::new();
    for a in 1..=cap {
        for b in 1..=cap {
            for c in 1..=cap {
                for seq in monotone_sequences(alphabet.widths(), a + b + c) {
                    let stages = [
                        seq[..a].to_vec(),
                        seq[a..a + b].to_vec(),
                        seq[a + b..].to_vec(),
                    ];
                    out.push(ArchitectureCode::with_kinds(stages, kinds, alphabet).unwrap());
                }
            }
        }
    }
    out.sort();
    out
}

/// Enumerate-then-filter reference for the branch-and-bound enumerator.
pub fn naive_subspace(query: &SubspaceQuery<'_>) -> Vec<(ArchitectureCode, Latency)> {
    all_codes(&query.alphabet, query.kinds, query.max_blocks_per_stage)
        .into_iter()
        .map(|c| c.with_stem(query.stem))
        .filter_map(|c| {
            let l = estimate_latency(&c, query.table, query.resolution, query.num_classes).unwrap();
            query.band.contains(l).then_some((c, l))
        })
        .collect()
}

/// Everything reachable from `x` by repeated elementary shrinks, `x` excluded.
pub fn bfs_closure(x: &ArchitectureCode, alphabet: &WidthAlphabet) -> BTreeSet<ArchitectureCode> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([x.clone()]);
    while let Some(c) = queue.pop_front() {
        for m in elementary_shrinks(&c, alphabet) {
            if seen.insert(m.clone()) {
                queue.push_back(m);
            }
        }
    }
    seen
}

/// Literal O(n²) reading: keep `x` unless some `w` is strictly faster and strictly more accurate.
pub fn brute_frontier<E: Clone + Ord>(points: &[(E, Latency, f64)]) -> BTreeSet<E> {
    points
        .iter()
        .filter(|(_, lx, ax)| !points.iter().any(|(_, lw, aw)| lw < lx && aw > ax))
        .map(|(e, _, _)| e.clone())
        .collect()
}

/// Pairwise scan: (pairs, pairs with ΔAcc < 0, pairs with ΔLat < 0, min ΔAcc).
pub fn pairwise_scan<E>(
    records: &[TrainedRecord<E>],
    precedes: impl Fn(&E, &E) -> bool,
) -> (usize, usize, usize, Option<f64>) {
    let (mut n, mut acc_neg, mut lat_neg, mut min_acc) = (0, 0, 0, None::<f64>);
    for x in records {
        for y in records {
            if precedes(&x.code, &y.code) {
                n += 1;
                let d = y.accuracy - x.accuracy;
                acc_neg += usize::from(d < 0.0);
                lat_neg += usize::from(y.latency < x.latency);
                min_acc = Some(min_acc.map_or(d, |m| m.min(d)));
            }
        }
    }
    (n, acc_neg, lat_neg, min_acc)
}

pub fn alphabet(widths: &[u32]) -> WidthAlphabet {
    WidthAlphabet::new(widths.iter().copied()).unwrap()
}

/// A generated table pricing every kind over `widths`.
pub fn synthetic_table(widths: &[u32], seed: u64) -> LatencyTable {
    let mut spec = SyntheticTable::tx2_like(alphabet(widths)).with_seed(seed);
    spec.kinds = vec![BlockKind::Basic, BlockKind::Bottleneck];
    spec.build()
}

pub fn query<'a>(
    table: &'a LatencyTable,
    widths: &[u32],
    cap: usize,
    band: LatencyBand,
) -> SubspaceQuery<'a> {
    let mut q = SubspaceQuery::new(table, band);
    q.alphabet = alphabet(widths);
    q.max_blocks_per_stage = cap;
    q.stem = Stem::default();
    q
}

/// A random valid code: random stage lengths, widths drawn and sorted.
pub fn random_code(rng: &mut impl Rng, widths: &[u32], cap: usize) -> ArchitectureCode {
    let lengths: [usize; STAGES] = std::array::from_fn(|_| rng.random_range(1..=cap));
    let mut all: Vec<u32> = (0..lengths.iter().sum::<usize>())
        .map(|_| widths[rng.random_range(0..widths.len())])
        .collect();
    all.sort_unstable();
    let mut it = all.into_iter();
    let stages = std::array::from_fn(|s| it.by_ref().take(lengths[s]).collect());
    ArchitectureCode::new(stages, BlockKind::Basic, &alphabet(widths)).unwrap()
}

/// Applies up to `steps` random elementary shrinks.
pub fn random_shrink(
    rng: &mut impl Rng,
    code: &ArchitectureCode,
    widths: &[u32],
    steps: usize,
) -> ArchitectureCode {
    let a = alphabet(widths);
    let mut cur = code.clone();
    for _ in 0..steps {
        let next: Vec<_> = elementary_shrinks(&cur, &a).into_iter().collect();
        if next.is_empty() {
            break;
        }
        cur = next[rng.random_range(0..next.len())].clone();
    }
    cur
}
