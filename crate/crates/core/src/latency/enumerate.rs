use std::collections::HashMap;

use thiserror::Error;

use super::{Latency, LatencyBand, LatencyTable, MissingKey};
use crate::arch::{
    ArchitectureCode, BlockConfig, BlockKind, LayerKind, ResolutionError, Stem, WidthAlphabet,
    STAGES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error(transparent)]
    Missing(#[from] MissingKey),
    #[error("subspace holds more than {0} architectures")]
    TooLarge(usize),
}

impl From<ResolutionError> for EnumerateError {
    fn from(e: ResolutionError) -> Self {
        EnumerateError::Missing(e.into())
    }
}

/// Everything that fixes a banded backbone subspace.
#[derive(Debug, Clone)]
pub struct SubspaceQuery<'a> {
    pub table: &'a LatencyTable,
    pub band: LatencyBand,
    pub alphabet: WidthAlphabet,
    pub kinds: [BlockKind; STAGES],
    pub stem: Stem,
    pub resolution: u32,
    pub num_classes: u32,
    pub max_blocks_per_stage: usize,
    /// Abort once this many members have been found.
    pub limit: Option<usize>,
}

impl<'a> SubspaceQuery<'a> {
    pub fn new(table: &'a LatencyTable, band: LatencyBand) -> Self {
        SubspaceQuery {
            table,
            band,
            alphabet: WidthAlphabet::default(),
            kinds: [BlockKind::Basic; STAGES],
            stem: Stem::default(),
            resolution: 224,
            num_classes: 1000,
            max_blocks_per_stage: 32,
            limit: None,
        }
    }
}

/// All valid codes whose estimated latency lies in the band, sorted by code.
///
/// Depth-first construction; a branch is cut as soon as its committed
/// latency plus the cheapest legal completion exceeds the band maximum.
pub fn enumerate_subspace(
    query: &SubspaceQuery<'_>,
) -> Result<Vec<(ArchitectureCode, Latency)>, EnumerateError> {
    let r = query.resolution;
    if r == 0 || !r.is_multiple_of(32) {
        return Err(ResolutionError(r).into());
    }
    let mut walker = Walker::new(query)?;
    let stem = walker.stem_latency;
    walker.dfs(0, 0, 0, stem)?;
    let mut out = walker.found;
    out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

struct Walker<'q, 'a> {
    q: &'q SubspaceQuery<'a>,
    stem_latency: Latency,
    /// (stage, previous listed width) -> cheapest cost of opening `stage`
    /// and finishing the network; stage == STAGES means just the head.
    completion: HashMap<(usize, u32), Latency>,
    stages: [Vec<u32>; STAGES],
    found: Vec<(ArchitectureCode, Latency)>,
}

impl<'q, 'a> Walker<'q, 'a> {
    fn new(q: &'q SubspaceQuery<'a>) -> Result<Self, EnumerateError> {
        let r = q.resolution;
        let stem_latency = q.table.sum(&[
            BlockConfig::square(LayerKind::StemConv, 3, r, q.stem.conv1, r / 2),
            BlockConfig::square(
                LayerKind::StemConv,
                q.stem.conv1,
                r / 2,
                q.stem.conv2,
                r / 4,
            ),
        ])?;
        let mut w = Walker {
            q,
            stem_latency,
            completion: HashMap::new(),
            stages: Default::default(),
            found: Vec::new(),
        };
        for &pw in q.alphabet.widths() {
            let head = w.head_cost(pw)?;
            w.completion.insert((STAGES, pw), head);
        }
        for s in (0..STAGES).rev() {
            let prevs: Vec<u32> = if s == 0 {
                vec![0]
            } else {
                q.alphabet.widths().to_vec()
            };
            for pw in prevs {
                let mut best = Latency::MAX;
                for &width in q.alphabet.at_least(pw) {
                    let c = w.block_cost(s, w.channels_before(s, pw), width, true)?
                        + w.completion[&(s + 1, width)];
                    best = best.min(c);
                }
                w.completion.insert((s, pw), best);
            }
        }
        Ok(w)
    }

    /// Channels entering `stage` when the previous listed width is `pw`.
    fn channels_before(&self, stage: usize, pw: u32) -> u32 {
        if stage == 0 {
            self.q.stem.conv2
        } else {
            self.q.kinds[stage - 1].output_channels(pw)
        }
    }

    fn stage_input_size(&self, stage: usize) -> u32 {
        (self.q.resolution / 4) >> stage
    }

    fn block_cost(
        &self,
        stage: usize,
        c_in: u32,
        width: u32,
        first: bool,
    ) -> Result<Latency, MissingKey> {
        let kind = self.q.kinds[stage];
        let size_in = self.stage_input_size(stage);
        let (i, o) = if first {
            (size_in, size_in / 2)
        } else {
            (size_in / 2, size_in / 2)
        };
        self.q.table.lookup(&BlockConfig::square(
            kind.into(),
            c_in,
            i,
            kind.output_channels(width),
            o,
        ))
    }

    fn head_cost(&self, last_width: u32) -> Result<Latency, MissingKey> {
        let c = self.q.kinds[STAGES - 1].output_channels(last_width);
        let size = self.q.resolution / 32;
        self.q.table.lookup(&BlockConfig::square(
            LayerKind::Head,
            c,
            size,
            self.q.num_classes,
            1,
        ))
    }

    fn dfs(
        &mut self,
        stage: usize,
        count: usize,
        prev: u32,
        committed: Latency,
    ) -> Result<(), EnumerateError> {
        let max = self.q.band.max;
        if count >= 1 {
            if stage == STAGES - 1 {
                let total = committed + self.completion[&(STAGES, prev)];
                if self.q.band.contains(total) {
                    if self.q.limit.is_some_and(|l| self.found.len() >= l) {
                        return Err(EnumerateError::TooLarge(self.found.len()));
                    }
                    let code = ArchitectureCode::from_parts_unchecked(
                        self.stages.clone(),
                        self.q.kinds,
                        self.q.stem,
                    );
                    self.found.push((code, total));
                }
            } else if committed + self.completion[&(stage + 1, prev)] <= max {
                self.dfs(stage + 1, 0, prev, committed)?;
            }
        }
        if count < self.q.max_blocks_per_stage {
            let c_in = if count == 0 {
                self.channels_before(stage, prev)
            } else {
                self.q.kinds[stage].output_channels(prev)
            };
            let widths = self.q.alphabet.at_least(prev).to_vec();
            for width in widths {
                let next = committed + self.block_cost(stage, c_in, width, count == 0)?;
                if next + self.completion[&(stage + 1, width)] > max {
                    continue;
                }
                self.stages[stage].push(width);
                let res = self.dfs(stage, count + 1, width, next);
                self.stages[stage].pop();
                res?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::SyntheticTable;

    #[test]
    fn empty_band_below_minimum() {
        let spec = SyntheticTable::tx2_like(WidthAlphabet::new([64, 128]).unwrap());
        let table = spec.build();
        let mut q = SubspaceQuery::new(
            &table,
            LatencyBand::new(Latency::ZERO, Latency::from_nanos(1)).unwrap(),
        );
        q.alphabet = spec.alphabet.clone();
        q.max_blocks_per_stage = 2;
        assert!(enumerate_subspace(&q).unwrap().is_empty());
    }

    #[test]
    fn unbounded_single_block_space() {
        let spec = SyntheticTable::tx2_like(WidthAlphabet::new([64, 128]).unwrap());
        let table = spec.build();
        let mut q = SubspaceQuery::new(&table, LatencyBand::unbounded());
        q.alphabet = spec.alphabet.clone();
        q.max_blocks_per_stage = 1;
        let got: Vec<String> = enumerate_subspace(&q)
            .unwrap()
            .iter()
            .map(|(c, _)| c.to_string())
            .collect();
        assert_eq!(
            got,
            [
                "[(64),(64),(64)]",
                "[(64),(64),(128)]",
                "[(64),(128),(128)]",
                "[(128),(128),(128)]"
            ]
        );
    }

    #[test]
    fn limit_aborts() {
        let spec = SyntheticTable::tx2_like(WidthAlphabet::new([64, 128]).unwrap());
        let table = spec.build();
        let mut q = SubspaceQuery::new(&table, LatencyBand::unbounded());
        q.alphabet = spec.alphabet.clone();
        q.max_blocks_per_stage = 2;
        q.limit = Some(3);
        assert_eq!(enumerate_subspace(&q), Err(EnumerateError::TooLarge(3)));
    }

    #[test]
    fn missing_entry_surfaces() {
        let table = LatencyTable::from_entries([(
            BlockConfig::square(LayerKind::StemConv, 3, 224, 32, 112),
            Latency::from_nanos(5),
        )])
        .unwrap();
        let q = SubspaceQuery::new(&table, LatencyBand::unbounded());
        assert!(matches!(
            enumerate_subspace(&q),
            Err(EnumerateError::Missing(MissingKey::Entry(_)))
        ));
    }
}
