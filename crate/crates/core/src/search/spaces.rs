use std::collections::BTreeMap;

use rand::Rng;

use super::{SearchSpace, SpaceError};
use crate::arch::{ArchitectureCode, BlockKind, Stem, WidthAlphabet, STAGES};
use crate::decoder::{decoder_precedes, enumerate_decoder_space, DecoderCode, DecoderLatencyModel};
use crate::latency::{
    enumerate_subspace, estimate_latency, EnumerateError, Latency, LatencyBand, LatencyTable,
    SubspaceQuery,
};
use crate::order::precedes;

/// Backbone codes inside a latency band, either enumerated up front or
/// drawn by rejection sampling.
#[derive(Debug, Clone)]
pub struct BackboneSpace {
    table: LatencyTable,
    band: LatencyBand,
    alphabet: WidthAlphabet,
    kinds: [BlockKind; STAGES],
    stem: Stem,
    resolution: u32,
    num_classes: u32,
    max_blocks_per_stage: usize,
    members: Option<(Vec<ArchitectureCode>, BTreeMap<ArchitectureCode, Latency>)>,
}

impl BackboneSpace {
    fn from_query(query: &SubspaceQuery<'_>) -> Self {
        BackboneSpace {
            table: query.table.clone(),
            band: query.band,
            alphabet: query.alphabet.clone(),
            kinds: query.kinds,
            stem: query.stem,
            resolution: query.resolution,
            num_classes: query.num_classes,
            max_blocks_per_stage: query.max_blocks_per_stage,
            members: None,
        }
    }

    /// Enumerates every member of the query's band.
    pub fn materialize(query: &SubspaceQuery<'_>) -> Result<Self, EnumerateError> {
        let found = enumerate_subspace(query)?;
        let mut space = Self::from_query(query);
        let codes = found.iter().map(|(c, _)| c.clone()).collect();
        space.members = Some((codes, found.into_iter().collect()));
        Ok(space)
    }

    /// A space that prices candidates on demand and never lists its members.
    pub fn sampled(query: &SubspaceQuery<'_>) -> Self {
        Self::from_query(query)
    }

    pub fn band(&self) -> LatencyBand {
        self.band
    }

    pub fn alphabet(&self) -> &WidthAlphabet {
        &self.alphabet
    }

    pub fn size(&self) -> Option<usize> {
        self.members.as_ref().map(|(v, _)| v.len())
    }

    fn shape_ok(&self, code: &ArchitectureCode) -> bool {
        code.kinds() == self.kinds
            && code.stem() == self.stem
            && code
                .lengths()
                .iter()
                .all(|&n| n <= self.max_blocks_per_stage)
            && code.widths().all(|w| self.alphabet.contains(w))
    }
}

impl SearchSpace for BackboneSpace {
    type Element = ArchitectureCode;

    fn contains(&self, code: &ArchitectureCode) -> bool {
        if let Some((_, lat)) = &self.members {
            return lat.contains_key(code);
        }
        self.shape_ok(code)
            && estimate_latency(code, &self.table, self.resolution, self.num_classes)
                .is_ok_and(|l| self.band.contains(l))
    }

    fn precedes(&self, lower: &ArchitectureCode, upper: &ArchitectureCode) -> bool {
        precedes(lower, upper)
    }

    fn latency(&self, code: &ArchitectureCode) -> Result<Latency, SpaceError> {
        if let Some(l) = self.members.as_ref().and_then(|(_, lat)| lat.get(code)) {
            return Ok(*l);
        }
        Ok(estimate_latency(
            code,
            &self.table,
            self.resolution,
            self.num_classes,
        )?)
    }

    fn elements(&self) -> Option<&[ArchitectureCode]> {
        self.members.as_ref().map(|(v, _)| v.as_slice())
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> Option<ArchitectureCode> {
        let widths = self.alphabet.widths();
        let cap = self.max_blocks_per_stage.max(1);
        let lengths: [usize; STAGES] = std::array::from_fn(|_| rng.random_range(1..=cap));
        let mut all: Vec<u32> = (0..lengths.iter().sum::<usize>())
            .map(|_| widths[rng.random_range(0..widths.len())])
            .collect();
        all.sort_unstable();
        let mut it = all.into_iter();
        let stages: [Vec<u32>; STAGES] =
            std::array::from_fn(|s| it.by_ref().take(lengths[s]).collect());
        Some(ArchitectureCode::from_parts_unchecked(
            stages, self.kinds, self.stem,
        ))
    }
}

/// Where decoder latencies come from.
#[derive(Debug, Clone)]
pub enum DecoderLatencySource {
    Table {
        model: DecoderLatencyModel,
        table: LatencyTable,
    },
    /// Measured per code; codes without a value are left out of the space.
    PerCode(BTreeMap<DecoderCode, Latency>),
}

/// Channel-controller settings for a fixed class count.
#[derive(Debug, Clone)]
pub struct DecoderSpace {
    classes: u32,
    members: Vec<DecoderCode>,
    latencies: BTreeMap<DecoderCode, Latency>,
}

impl DecoderSpace {
    pub fn new(
        classes: u32,
        source: &DecoderLatencySource,
        band: Option<LatencyBand>,
    ) -> Result<Self, SpaceError> {
        let mut latencies = BTreeMap::new();
        for code in enumerate_decoder_space(classes) {
            let lat = match source {
                DecoderLatencySource::Table { model, table } => model.estimate(&code, table)?,
                DecoderLatencySource::PerCode(map) => match map.get(&code) {
                    Some(l) => *l,
                    None => continue,
                },
            };
            if band.is_none_or(|b| b.contains(lat)) {
                latencies.insert(code, lat);
            }
        }
        Ok(DecoderSpace {
            classes,
            members: latencies.keys().copied().collect(),
            latencies,
        })
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl SearchSpace for DecoderSpace {
    type Element = DecoderCode;

    fn contains(&self, code: &DecoderCode) -> bool {
        self.latencies.contains_key(code)
    }

    fn precedes(&self, lower: &DecoderCode, upper: &DecoderCode) -> bool {
        decoder_precedes(lower, upper)
    }

    fn latency(&self, code: &DecoderCode) -> Result<Latency, SpaceError> {
        self.latencies
            .get(code)
            .copied()
            .ok_or_else(|| SpaceError::Unpriced(code.to_string()))
    }

    fn elements(&self) -> Option<&[DecoderCode]> {
        Some(&self.members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::SyntheticTable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (SyntheticTable, LatencyTable) {
        let spec = SyntheticTable::tx2_like(WidthAlphabet::new([64, 128, 256]).unwrap());
        let table = spec.build();
        (spec, table)
    }

    #[test]
    fn sampled_and_materialized_agree_on_membership() {
        let (spec, table) = small();
        let mut q = SubspaceQuery::new(&table, "1.0,1.6".parse().unwrap());
        q.alphabet = spec.alphabet.clone();
        q.max_blocks_per_stage = 2;
        let full = BackboneSpace::materialize(&q).unwrap();
        let lazy = BackboneSpace::sampled(&q);
        assert!(full.size().unwrap() > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let c = lazy.sample(&mut rng).unwrap();
            assert!(c.lengths().iter().all(|&n| (1..=2).contains(&n)));
            assert_eq!(full.contains(&c), lazy.contains(&c), "{c}");
        }
        for c in full.elements().unwrap() {
            assert!(lazy.contains(c));
            assert_eq!(full.latency(c).unwrap(), lazy.latency(c).unwrap());
        }
    }

    #[test]
    fn decoder_space_sizes() {
        let backbone: ArchitectureCode = "[(64),(128),(256)]".parse().unwrap();
        let model = DecoderLatencyModel::for_backbone(&backbone, 512, 1024);
        let table = SyntheticTable::tx2_like(Default::default()).price(model.keys(19));
        let src = DecoderLatencySource::Table { model, table };
        let space = DecoderSpace::new(19, &src, None).unwrap();
        assert_eq!(space.len(), 216);

        let one: DecoderCode = "19:[32,32,32]".parse().unwrap();
        let per_code = DecoderLatencySource::PerCode([(one, Latency::from_nanos(10))].into());
        let space = DecoderSpace::new(19, &per_code, None).unwrap();
        assert_eq!(space.elements().unwrap(), [one]);
        let other: DecoderCode = "19:[64,32,32]".parse().unwrap();
        assert!(matches!(
            space.latency(&other),
            Err(SpaceError::Unpriced(_))
        ));
    }
}
