//! Precedence among backbone architectures.
//!
//! `x ≺ y` when `x` can be reached from `y` by repeatedly deleting blocks
//! (shallower, same widths) and lowering widths (narrower, same depth)
//! while staying a valid code. Stage by stage this is exactly "x's widths
//! embed into y's widths as a dominated subsequence".

use std::collections::BTreeSet;

use crate::arch::{ArchitectureCode, WidthAlphabet, STAGES};

/// Outcome of comparing two codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precedence {
    /// `x ≺ y`
    Precedes,
    Equal,
    /// `y ≺ x`
    Succeeds,
    Incomparable,
}

/// True when `lower` embeds into `upper`: some strictly increasing position
/// map sends every `lower[i]` to an `upper` entry at least as wide.
///
/// Greedy earliest matching is optimal for this embedding.
pub fn is_dominated_subsequence(lower: &[u32], upper: &[u32]) -> bool {
    let mut it = upper.iter();
    lower.iter().all(|&w| it.any(|&u| u >= w))
}

fn weakly_precedes(x: &ArchitectureCode, y: &ArchitectureCode) -> bool {
    x.kinds() == y.kinds()
        && x.stem() == y.stem()
        && (0..STAGES).all(|s| is_dominated_subsequence(x.stage(s), y.stage(s)))
}

/// Strict precedence `x ≺ y`.
pub fn precedes(x: &ArchitectureCode, y: &ArchitectureCode) -> bool {
    x != y && x.num_blocks() <= y.num_blocks() && weakly_precedes(x, y)
}

pub fn compare(x: &ArchitectureCode, y: &ArchitectureCode) -> Precedence {
    if x == y {
        Precedence::Equal
    } else if precedes(x, y) {
        Precedence::Precedes
    } else if precedes(y, x) {
        Precedence::Succeeds
    } else {
        Precedence::Incomparable
    }
}

/// Codes one generator step below `x`: delete one block from a stage that
/// keeps at least one, or lower one block to the next alphabet width
/// without breaking monotonicity.
pub fn elementary_shrinks(
    x: &ArchitectureCode,
    alphabet: &WidthAlphabet,
) -> BTreeSet<ArchitectureCode> {
    let mut out = BTreeSet::new();
    let kinds = x.kinds();
    let stem = x.stem();

    for s in 0..STAGES {
        let stage = x.stage(s);
        if stage.len() >= 2 {
            for b in 0..stage.len() {
                let mut stages = x.stages().clone();
                stages[s].remove(b);
                out.insert(ArchitectureCode::from_parts_unchecked(stages, kinds, stem));
            }
        }
    }

    let mut previous = 0;
    for s in 0..STAGES {
        for (b, &width) in x.stage(s).iter().enumerate() {
            if let Some(lowered) = alphabet.lower(width) {
                if lowered >= previous {
                    let mut stages = x.stages().clone();
                    stages[s][b] = lowered;
                    out.insert(ArchitectureCode::from_parts_unchecked(stages, kinds, stem));
                }
            }
            previous = width;
        }
    }
    out
}

/// Number of members of `space` that strictly precede `x`.
pub fn count_precedents<'a>(
    x: &ArchitectureCode,
    space: impl IntoIterator<Item = &'a ArchitectureCode>,
) -> usize {
    space.into_iter().filter(|m| precedes(m, x)).count()
}

/// Members of `space` that strictly precede `x`, in iteration order.
pub fn precedents<'a>(
    x: &ArchitectureCode,
    space: impl IntoIterator<Item = &'a ArchitectureCode>,
) -> Vec<&'a ArchitectureCode> {
    space.into_iter().filter(|m| precedes(m, x)).collect()
}
