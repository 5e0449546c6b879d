//! Backbone architecture encoding.
//!
//! A backbone is a fixed two-convolution stem followed by three residual
//! stages (3, 4 and 5). Each stage is a list of block widths and the whole
//! width sequence, read left to right across stages, never decreases.
//!
//! The canonical text form is
//!
//! ```text
//! [(64,64,64),(128,128,128),(256,256,256,512)]
//! [(64),(64),(64)]@bottleneck
//! [(64,64,128),(128x10,256)@bottleneck,(256x4,512x2)@bottleneck]
//! ```
//!
//! A trailing `@kind` applies to every stage; a `@kind` directly after a
//! stage overrides it for that stage. `WxN` (or `W×N`) repeats a width.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widths a block may take when no alphabet is configured.
pub const DEFAULT_WIDTHS: [u32; 5] = [64, 128, 256, 512, 1024];

/// Output-channel multiplier of a bottleneck block's final 1x1 convolution.
pub const BOTTLENECK_EXPANSION: u32 = 4;

/// Number of searchable stages (3, 4, 5).
pub const STAGES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("width {0} is not in the width alphabet")]
    WidthNotInAlphabet(u32),
    #[error(
        "stage {stage} block {block}: width {width} is narrower than preceding width {previous}"
    )]
    NonMonotone {
        stage: usize,
        block: usize,
        previous: u32,
        width: u32,
    },
    #[error("stage {0} has no blocks")]
    EmptyStage(usize),
    #[error("expected {STAGES} stages, found {0}")]
    StageCount(usize),
    #[error("unknown block kind `{0}`")]
    UnknownKind(String),
}

/// Sorted set of admissible block widths.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidthAlphabet(Vec<u32>);

impl WidthAlphabet {
    /// Builds an alphabet from arbitrary positive widths (sorted, deduplicated).
    pub fn new(widths: impl IntoIterator<Item = u32>) -> Option<Self> {
        let mut v: Vec<u32> = widths.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() || v[0] == 0 {
            return None;
        }
        Some(Self(v))
    }

    pub fn widths(&self) -> &[u32] {
        &self.0
    }

    pub fn contains(&self, width: u32) -> bool {
        self.0.binary_search(&width).is_ok()
    }

    pub fn min(&self) -> u32 {
        self.0[0]
    }

    /// The next smaller alphabet value, if any.
    pub fn lower(&self, width: u32) -> Option<u32> {
        let idx = self.0.partition_point(|&w| w < width);
        idx.checked_sub(1).map(|i| self.0[i])
    }

    /// Widths `>= floor`, ascending.
    pub fn at_least(&self, floor: u32) -> &[u32] {
        let idx = self.0.partition_point(|&w| w < floor);
        &self.0[idx..]
    }
}

impl Default for WidthAlphabet {
    fn default() -> Self {
        Self(DEFAULT_WIDTHS.to_vec())
    }
}

impl FromStr for WidthAlphabet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let widths = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| format!("bad width `{t}`: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        WidthAlphabet::new(widths).ok_or_else(|| "alphabet must hold positive widths".to_string())
    }
}

impl fmt::Display for WidthAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Residual block flavour.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum BlockKind {
    /// Two 3x3 convolutions plus shortcut.
    #[default]
    Basic,
    /// 1x1 / 3x3 / 1x1 with a 4x expanded output.
    Bottleneck,
}

impl BlockKind {
    pub fn convs(self) -> usize {
        match self {
            BlockKind::Basic => 2,
            BlockKind::Bottleneck => 3,
        }
    }

    /// Channels a block of listed width `width` emits.
    pub fn output_channels(self, width: u32) -> u32 {
        match self {
            BlockKind::Basic => width,
            BlockKind::Bottleneck => width * BOTTLENECK_EXPANSION,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Basic => "basic",
            BlockKind::Bottleneck => "bottleneck",
        }
    }
}

impl FromStr for BlockKind {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(BlockKind::Basic),
            "bottleneck" => Ok(BlockKind::Bottleneck),
            other => Err(ParseError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output widths of the two stem convolutions (stages 1 and 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stem {
    pub conv1: u32,
    pub conv2: u32,
}

impl Default for Stem {
    fn default() -> Self {
        Stem {
            conv1: 32,
            conv2: 64,
        }
    }
}

/// A backbone architecture: per-stage block widths, per-stage block kind and stem.
///
/// Constructed only through validating paths, so every value upholds:
/// each stage has at least one block, every width is in the alphabet it
/// was checked against, and the concatenated widths never decrease.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArchitectureCode {
    stages: [Vec<u32>; STAGES],
    kinds: [BlockKind; STAGES],
    stem: Stem,
}

impl ArchitectureCode {
    /// Validates and builds a code with one block kind for all stages.
    pub fn new(
        stages: [Vec<u32>; STAGES],
        kind: BlockKind,
        alphabet: &WidthAlphabet,
    ) -> Result<Self, ParseError> {
        Self::with_kinds(stages, [kind; STAGES], alphabet)
    }

    pub fn with_kinds(
        stages: [Vec<u32>; STAGES],
        kinds: [BlockKind; STAGES],
        alphabet: &WidthAlphabet,
    ) -> Result<Self, ParseError> {
        let mut previous = 0;
        for (s, stage) in stages.iter().enumerate() {
            if stage.is_empty() {
                return Err(ParseError::EmptyStage(s + 3));
            }
            for (b, &width) in stage.iter().enumerate() {
                if !alphabet.contains(width) {
                    return Err(ParseError::WidthNotInAlphabet(width));
                }
                if width < previous {
                    return Err(ParseError::NonMonotone {
                        stage: s + 3,
                        block: b,
                        previous,
                        width,
                    });
                }
                previous = width;
            }
        }
        Ok(Self {
            stages,
            kinds,
            stem: Stem::default(),
        })
    }

    /// Builds a code from parts already known to be valid.
    pub(crate) fn from_parts_unchecked(
        stages: [Vec<u32>; STAGES],
        kinds: [BlockKind; STAGES],
        stem: Stem,
    ) -> Self {
        debug_assert!(stages.iter().all(|s| !s.is_empty()));
        Self {
            stages,
            kinds,
            stem,
        }
    }

    pub fn with_stem(mut self, stem: Stem) -> Self {
        self.stem = stem;
        self
    }

    /// Parses the canonical text form against `alphabet`.
    pub fn parse_with(text: &str, alphabet: &WidthAlphabet) -> Result<Self, ParseError> {
        let (stages, kinds) = Parser::new(text).parse()?;
        Self::with_kinds(stages, kinds, alphabet)
    }

    pub fn stages(&self) -> &[Vec<u32>; STAGES] {
        &self.stages
    }

    pub fn stage(&self, s: usize) -> &[u32] {
        &self.stages[s]
    }

    pub fn kinds(&self) -> [BlockKind; STAGES] {
        self.kinds
    }

    pub fn stem(&self) -> Stem {
        self.stem
    }

    /// Block counts `(L, M, N)`.
    pub fn lengths(&self) -> [usize; STAGES] {
        [
            self.stages[0].len(),
            self.stages[1].len(),
            self.stages[2].len(),
        ]
    }

    pub fn num_blocks(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    /// Listed widths of all blocks, stage 3 first.
    pub fn widths(&self) -> impl Iterator<Item = u32> + '_ {
        self.stages.iter().flatten().copied()
    }

    /// Weight-layer count: two stem convolutions, every block convolution
    /// and the final fully connected layer.
    pub fn depth(&self) -> usize {
        let blocks: usize = self
            .stages
            .iter()
            .zip(self.kinds)
            .map(|(stage, kind)| stage.len() * kind.convs())
            .sum();
        2 + blocks + 1
    }

    /// Per-layer configurations for a square input of side `resolution`.
    pub fn block_configs(
        &self,
        resolution: u32,
        num_classes: u32,
    ) -> Result<Vec<BlockConfig>, ResolutionError> {
        if resolution == 0 || !resolution.is_multiple_of(32) {
            return Err(ResolutionError(resolution));
        }
        let mut out = Vec::with_capacity(self.num_blocks() + 3);
        let r = resolution;
        out.push(BlockConfig::square(
            LayerKind::StemConv,
            3,
            r,
            self.stem.conv1,
            r / 2,
        ));
        out.push(BlockConfig::square(
            LayerKind::StemConv,
            self.stem.conv1,
            r / 2,
            self.stem.conv2,
            r / 4,
        ));
        let mut channels = self.stem.conv2;
        let mut size = r / 4;
        for (stage, kind) in self.stages.iter().zip(self.kinds) {
            for (b, &width) in stage.iter().enumerate() {
                let out_size = if b == 0 { size / 2 } else { size };
                let c_out = kind.output_channels(width);
                out.push(BlockConfig::square(
                    kind.into(),
                    channels,
                    size,
                    c_out,
                    out_size,
                ));
                channels = c_out;
                size = out_size;
            }
        }
        out.push(BlockConfig::square(
            LayerKind::Head,
            channels,
            size,
            num_classes,
            1,
        ));
        Ok(out)
    }
}

impl FromStr for ArchitectureCode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with(s, &WidthAlphabet::default())
    }
}

impl fmt::Display for ArchitectureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let uniform = self.kinds.iter().all(|&k| k == self.kinds[0]);
        f.write_str("[")?;
        for (s, stage) in self.stages.iter().enumerate() {
            if s > 0 {
                f.write_str(",")?;
            }
            f.write_str("(")?;
            for (b, w) in stage.iter().enumerate() {
                if b > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{w}")?;
            }
            f.write_str(")")?;
            if !uniform && self.kinds[s] != BlockKind::Basic {
                write!(f, "@{}", self.kinds[s])?;
            }
        }
        f.write_str("]")?;
        if uniform && self.kinds[0] != BlockKind::Basic {
            write!(f, "@{}", self.kinds[0])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("input resolution {0} is not a positive multiple of 32")]
pub struct ResolutionError(pub u32);

/// What a latency-table row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    StemConv,
    BasicBlock,
    BottleneckBlock,
    Head,
    /// Decoder 1x1 channel controller.
    ChannelController,
    /// Decoder fusion: 1x1 projection of the low-resolution input.
    FusionProjection,
    /// Decoder fusion: 3x3 convolution over the concatenated tensor.
    FusionConv,
}

impl LayerKind {
    pub const ALL: [LayerKind; 7] = [
        LayerKind::StemConv,
        LayerKind::BasicBlock,
        LayerKind::BottleneckBlock,
        LayerKind::Head,
        LayerKind::ChannelController,
        LayerKind::FusionProjection,
        LayerKind::FusionConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::StemConv => "stem_conv",
            LayerKind::BasicBlock => "basic_block",
            LayerKind::BottleneckBlock => "bottleneck_block",
            LayerKind::Head => "head",
            LayerKind::ChannelController => "cc_conv",
            LayerKind::FusionProjection => "fusion_proj",
            LayerKind::FusionConv => "fusion_conv",
        }
    }
}

impl From<BlockKind> for LayerKind {
    fn from(kind: BlockKind) -> Self {
        match kind {
            BlockKind::Basic => LayerKind::BasicBlock,
            BlockKind::Bottleneck => LayerKind::BottleneckBlock,
        }
    }
}

impl FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown layer kind `{s}`"))
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer's tensor shapes; the key of a latency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockConfig {
    pub kind: LayerKind,
    pub c_in: u32,
    pub h_in: u32,
    pub w_in: u32,
    pub c_out: u32,
    pub h_out: u32,
    pub w_out: u32,
}

impl BlockConfig {
    pub fn square(kind: LayerKind, c_in: u32, size_in: u32, c_out: u32, size_out: u32) -> Self {
        BlockConfig {
            kind,
            c_in,
            h_in: size_in,
            w_in: size_in,
            c_out,
            h_out: size_out,
            w_out: size_out,
        }
    }

    /// Same layer with channels swapped out; spatial key unchanged.
    pub fn spatial_key(&self) -> (LayerKind, u32, u32, u32, u32) {
        (self.kind, self.h_in, self.w_in, self.h_out, self.w_out)
    }
}

impl fmt::Display for BlockConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({},{},{},{},{},{})",
            self.kind, self.c_in, self.h_in, self.w_in, self.c_out, self.h_out, self.w_out
        )
    }
}

struct Parser<'a> {
    bytes: Vec<(usize, char)>,
    at: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            bytes: src
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .collect(),
            at: 0,
            src,
        }
    }

    fn pos(&self) -> usize {
        self.bytes.get(self.at).map_or(self.src.len(), |&(p, _)| p)
    }

    fn peek(&self) -> Option<char> {
        self.bytes.get(self.at).map(|&(_, c)| c)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.at += 1;
                Ok(())
            }
            Some(c) => self.err(format!("expected `{want}`, found `{c}`")),
            None => self.err(format!("expected `{want}`, found end of input")),
        }
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        let start = self.at;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.at += 1;
        }
        if start == self.at {
            return self.err("expected a width");
        }
        let digits: String = self.bytes[start..self.at].iter().map(|&(_, c)| c).collect();
        digits.parse().or_else(|_| {
            self.at = start;
            self.err("width out of range")
        })
    }

    fn kind_suffix(&mut self) -> Result<Option<BlockKind>, ParseError> {
        if self.peek() != Some('@') {
            return Ok(None);
        }
        self.at += 1;
        let start = self.at;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.at += 1;
        }
        let word: String = self.bytes[start..self.at].iter().map(|&(_, c)| c).collect();
        word.parse().map(Some)
    }

    fn stage(&mut self) -> Result<(Vec<u32>, Option<BlockKind>), ParseError> {
        self.expect('(')?;
        let mut widths = Vec::new();
        if self.peek() == Some(')') {
            self.at += 1;
            return Ok((widths, self.kind_suffix()?));
        }
        loop {
            let width = self.number()?;
            let repeat = if matches!(self.peek(), Some('x' | 'X' | '×')) {
                self.at += 1;
                self.number()?
            } else {
                1
            };
            if repeat == 0 {
                return self.err("repeat count must be positive");
            }
            widths.extend(std::iter::repeat_n(width, repeat as usize));
            match self.peek() {
                Some(',') => self.at += 1,
                Some(')') => {
                    self.at += 1;
                    break;
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
        Ok((widths, self.kind_suffix()?))
    }

    fn parse(mut self) -> Result<([Vec<u32>; STAGES], [BlockKind; STAGES]), ParseError> {
        self.expect('[')?;
        let mut stages = Vec::new();
        loop {
            stages.push(self.stage()?);
            match self.peek() {
                Some(',') => self.at += 1,
                Some(']') => {
                    self.at += 1;
                    break;
                }
                _ => return self.err("expected `,` or `]`"),
            }
        }
        let overall = self.kind_suffix()?.unwrap_or_default();
        if self.peek().is_some() {
            return self.err("trailing input");
        }
        if stages.len() != STAGES {
            return Err(ParseError::StageCount(stages.len()));
        }
        let mut kinds = [overall; STAGES];
        let mut widths: [Vec<u32>; STAGES] = Default::default();
        for (s, (w, k)) in stages.into_iter().enumerate() {
            widths[s] = w;
            if let Some(k) = k {
                kinds[s] = k;
            }
        }
        Ok((widths, kinds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DF1: &str = "[(64,64,64),(128,128,128),(256,256,256,512)]";
    const DF2: &str = "[(64,64,128),(128x10,256),(256x4,512,512)]";
    const DF2A: &str = "[(64,64,128),(128x10,256)@bottleneck,(256x4,512x2)@bottleneck]";

    fn code(s: &str) -> ArchitectureCode {
        s.parse().unwrap()
    }

    #[test]
    fn parses_df1() {
        let c = code(DF1);
        assert_eq!(c.lengths(), [3, 3, 4]);
        assert_eq!(c.stage(2), &[256, 256, 256, 512]);
        assert_eq!(c.kinds(), [BlockKind::Basic; 3]);
        assert_eq!(c.to_string(), DF1);
    }

    #[test]
    fn minimal_and_errors() {
        assert_eq!(code("[(64),(64),(64)]").lengths(), [1, 1, 1]);
        assert!(matches!(
            "[(128),(64),(64)]".parse::<ArchitectureCode>(),
            Err(ParseError::NonMonotone { stage: 4, .. })
        ));
        assert!(matches!(
            "[(64),(),(64)]".parse::<ArchitectureCode>(),
            Err(ParseError::EmptyStage(4))
        ));
        assert!(matches!(
            "[(64),(96),(128)]".parse::<ArchitectureCode>(),
            Err(ParseError::WidthNotInAlphabet(96))
        ));
        assert!(matches!(
            "[(64),(64)]".parse::<ArchitectureCode>(),
            Err(ParseError::StageCount(2))
        ));
        assert!(matches!(
            "[(64),(64),(64)".parse::<ArchitectureCode>(),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            "[(64),(64),(64)]@wide".parse::<ArchitectureCode>(),
            Err(ParseError::UnknownKind(_))
        ));
    }

    #[test]
    fn whitespace_and_repeats() {
        let a = code(" [ ( 64 , 64 ) , (128×2) , (256) ] ");
        assert_eq!(a.to_string(), "[(64,64),(128,128),(256)]");
        assert_eq!(
            code("[(64),(64),(64)] @bottleneck").kinds(),
            [BlockKind::Bottleneck; 3]
        );
    }

    #[test]
    fn mixed_kinds_round_trip() {
        let c = code(DF2A);
        assert_eq!(
            c.kinds(),
            [
                BlockKind::Basic,
                BlockKind::Bottleneck,
                BlockKind::Bottleneck
            ]
        );
        let text = c.to_string();
        assert_eq!(code(&text), c);
        let uniform = code("[(64)@bottleneck,(64)@bottleneck,(64)@bottleneck]");
        assert_eq!(uniform.to_string(), "[(64),(64),(64)]@bottleneck");
    }

    #[test]
    fn depth_vectors() {
        assert_eq!(code(DF1).depth(), 23);
        assert_eq!(code(DF2).depth(), 43);
        assert_eq!(code(DF2A).depth(), 60);
        assert_eq!(code("[(64),(64),(64)]").depth(), 9);
    }

    #[test]
    fn stem_configs_at_224() {
        let cfgs = code(DF1).block_configs(224, 1000).unwrap();
        assert_eq!(
            cfgs[0],
            BlockConfig::square(LayerKind::StemConv, 3, 224, 32, 112)
        );
        assert_eq!(
            cfgs[1],
            BlockConfig::square(LayerKind::StemConv, 32, 112, 64, 56)
        );
        assert_eq!(cfgs.len(), 2 + 10 + 1);
        // stage 5 runs at 7x7
        for cfg in &cfgs[8..12] {
            assert_eq!((cfg.h_out, cfg.w_out), (7, 7));
        }
        let head = cfgs.last().unwrap();
        assert_eq!(*head, BlockConfig::square(LayerKind::Head, 512, 7, 1000, 1));
    }

    #[test]
    fn halving_chain_at_32() {
        let cfgs = code("[(64),(64),(64)]").block_configs(32, 10).unwrap();
        let ins: Vec<u32> = cfgs[2..5].iter().map(|c| c.h_in).collect();
        assert_eq!(ins, [8, 4, 2]);
        assert_eq!(cfgs[5], BlockConfig::square(LayerKind::Head, 64, 1, 10, 1));
    }

    #[test]
    fn bottleneck_expands_channels() {
        let cfgs = code(DF2A).block_configs(224, 1000).unwrap();
        // first stage-4 block: basic 128 -> bottleneck 128 (512 out)
        let first4 = cfgs[2 + 3];
        assert_eq!(
            (first4.kind, first4.c_in, first4.c_out),
            (LayerKind::BottleneckBlock, 128, 512)
        );
        assert_eq!(cfgs[2 + 4].c_in, 512);
        assert_eq!(cfgs.last().unwrap().c_in, 2048);
    }

    #[test]
    fn rejects_bad_resolution() {
        assert_eq!(
            code(DF1).block_configs(100, 1000),
            Err(ResolutionError(100))
        );
        assert_eq!(code(DF1).block_configs(0, 1000), Err(ResolutionError(0)));
    }

    #[test]
    fn alphabet_helpers() {
        let a = WidthAlphabet::default();
        assert_eq!(a.lower(128), Some(64));
        assert_eq!(a.lower(64), None);
        assert_eq!(a.at_least(200), &[256, 512, 1024]);
        assert_eq!(
            "256, 64,128".parse::<WidthAlphabet>().unwrap().widths(),
            &[64, 128, 256]
        );
        assert!(WidthAlphabet::new([0, 64]).is_none());
    }
}
