//! Generated latency tables with a multiply-accumulate cost model.
//!
//! Used where no profiled table exists: tests, demos and the soundness
//! suites. Every entry costs `overhead + MACs / throughput`, with the
//! compute term scaled by a small seeded jitter. The jitter keeps distinct
//! architectures from tying and stays well inside the gap between adjacent
//! channel counts, so the result is channel-monotone.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Latency, LatencyTable, TableMeta};
use crate::arch::{BlockConfig, BlockKind, LayerKind, Stem, WidthAlphabet, STAGES};

#[derive(Debug, Clone)]
pub struct SyntheticTable {
    pub alphabet: WidthAlphabet,
    /// Block kinds to price.
    pub kinds: Vec<BlockKind>,
    pub stem: Stem,
    pub resolution: u32,
    pub num_classes: u32,
    pub overhead_ns: f64,
    pub macs_per_ns: f64,
    /// Relative jitter; each compute term is scaled by `1 + jitter * u`, `u ∈ [0,1)`.
    pub jitter: f64,
    pub seed: u64,
    /// Entries forced to a fixed value after generation.
    pub pinned: Vec<(BlockConfig, Latency)>,
    pub platform: String,
}

impl SyntheticTable {
    /// Roughly embedded-GPU scale at 224x224, with the 32->64 stem
    /// convolution at 112->56 pinned to 0.143 ms.
    pub fn tx2_like(alphabet: WidthAlphabet) -> Self {
        SyntheticTable {
            alphabet,
            kinds: vec![BlockKind::Basic],
            stem: Stem::default(),
            resolution: 224,
            num_classes: 1000,
            overhead_ns: 20_000.0,
            macs_per_ns: 400.0,
            jitter: 0.02,
            seed: 0,
            pinned: vec![(
                BlockConfig::square(LayerKind::StemConv, 32, 112, 64, 56),
                Latency::from_nanos(143_000),
            )],
            platform: "synthetic-tx2".to_string(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn macs(&self, key: &BlockConfig) -> f64 {
        let c_in = f64::from(key.c_in);
        let c_out = f64::from(key.c_out);
        let out_px = f64::from(key.h_out) * f64::from(key.w_out);
        match key.kind {
            LayerKind::StemConv | LayerKind::FusionConv => 9.0 * c_in * c_out * out_px,
            LayerKind::BasicBlock => {
                (9.0 * c_in * c_out + 9.0 * c_out * c_out + c_in * c_out) * out_px
            }
            LayerKind::BottleneckBlock => {
                let w = c_out / 4.0;
                (c_in * w + 9.0 * w * w + w * c_out + c_in * c_out) * out_px
            }
            LayerKind::Head => c_in * f64::from(key.h_in) * f64::from(key.w_in) + c_in * c_out,
            LayerKind::ChannelController | LayerKind::FusionProjection => c_in * c_out * out_px,
        }
    }

    /// Every configuration a backbone over this alphabet and these kinds can need.
    pub fn keys(&self) -> Vec<BlockConfig> {
        let r = self.resolution;
        let widths = self.alphabet.widths();
        let mut keys = vec![
            BlockConfig::square(LayerKind::StemConv, 3, r, self.stem.conv1, r / 2),
            BlockConfig::square(
                LayerKind::StemConv,
                self.stem.conv1,
                r / 2,
                self.stem.conv2,
                r / 4,
            ),
        ];
        let expanded = |w: u32| self.kinds.iter().map(move |k| k.output_channels(w));
        for s in 0..STAGES {
            let size_in = (r / 4) >> s;
            for &kind in &self.kinds {
                for &w in widths {
                    let c_out = kind.output_channels(w);
                    // first block of the stage
                    let mut entry: Vec<u32> = if s == 0 {
                        vec![self.stem.conv2]
                    } else {
                        widths
                            .iter()
                            .filter(|&&p| p <= w)
                            .flat_map(|&p| expanded(p))
                            .collect()
                    };
                    entry.sort_unstable();
                    entry.dedup();
                    for c_in in entry {
                        keys.push(BlockConfig::square(
                            kind.into(),
                            c_in,
                            size_in,
                            c_out,
                            size_in / 2,
                        ));
                    }
                    // later blocks keep the stage's kind
                    for &p in widths.iter().filter(|&&p| p <= w) {
                        keys.push(BlockConfig::square(
                            kind.into(),
                            kind.output_channels(p),
                            size_in / 2,
                            c_out,
                            size_in / 2,
                        ));
                    }
                }
            }
        }
        for &w in widths {
            for c in expanded(w) {
                keys.push(BlockConfig::square(
                    LayerKind::Head,
                    c,
                    r / 32,
                    self.num_classes,
                    1,
                ));
            }
        }
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// Prices `keys` with the cost model.
    pub fn price(&self, keys: impl IntoIterator<Item = BlockConfig>) -> LatencyTable {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut sorted: Vec<BlockConfig> = keys.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut entries: BTreeMap<BlockConfig, Latency> = sorted
            .into_iter()
            .map(|key| {
                let scale = 1.0 + self.jitter * rng.random::<f64>();
                let ns = (self.overhead_ns + scale * self.macs(&key) / self.macs_per_ns)
                    .round()
                    .max(1.0) as u64;
                (key, Latency::from_nanos(ns))
            })
            .collect();
        for (key, lat) in &self.pinned {
            if let Some(slot) = entries.get_mut(key) {
                *slot = *lat;
            }
        }
        let mut table =
            LatencyTable::from_entries(entries).expect("generated entries are positive and unique");
        table.meta = TableMeta {
            platform: Some(self.platform.clone()),
            resolution: Some(self.resolution),
            tool: Some("synthetic".to_string()),
        };
        table
    }

    pub fn build(&self) -> LatencyTable {
        self.price(self.keys())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::estimate_latency;

    #[test]
    fn tx2_like_is_monotone_and_prices_df1() {
        let spec = SyntheticTable::tx2_like(WidthAlphabet::default());
        let table = spec.build();
        assert!(table.audit_monotonicity().is_monotone());
        let stem2 = BlockConfig::square(LayerKind::StemConv, 32, 112, 64, 56);
        assert_eq!(table.get(&stem2), Some(Latency::from_nanos(143_000)));
        let df1 = "[(64,64,64),(128,128,128),(256,256,256,512)]"
            .parse()
            .unwrap();
        let ms = estimate_latency(&df1, &table, 224, 1000).unwrap().as_ms();
        assert!((1.0..5.0).contains(&ms), "DF1 at {ms} ms");
    }

    #[test]
    fn monotone_for_every_seed() {
        // head entries are almost pure overhead; jitter must not reorder them
        for seed in 0..64 {
            let mut spec = SyntheticTable::tx2_like(WidthAlphabet::default()).with_seed(seed);
            spec.kinds = vec![BlockKind::Basic, BlockKind::Bottleneck];
            let report = spec.build().audit_monotonicity();
            assert!(
                report.is_monotone(),
                "seed {seed}: {:?}",
                report.violations[0]
            );
        }
    }

    #[test]
    fn seeds_change_values_not_keys() {
        let a = SyntheticTable::tx2_like(WidthAlphabet::default()).build();
        let b = SyntheticTable::tx2_like(WidthAlphabet::default())
            .with_seed(7)
            .build();
        assert_eq!(a.len(), b.len());
        assert_ne!(a, b);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.0 == y.0));
    }

    #[test]
    fn bottleneck_keys_priced() {
        let mut spec = SyntheticTable::tx2_like(WidthAlphabet::new([64, 128]).unwrap());
        spec.kinds = vec![BlockKind::Basic, BlockKind::Bottleneck];
        let table = spec.build();
        assert!(table.audit_monotonicity().is_monotone());
        let code = "[(64),(64)@bottleneck,(128)@bottleneck]".parse().unwrap();
        assert!(estimate_latency(&code, &table, 224, 1000).is_ok());
    }
}
