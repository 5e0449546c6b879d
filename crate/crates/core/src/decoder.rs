//! Decoder channel-controller search space.
//!
//! A segmentation decoder is configured by the widths `[C3, C4, C5]` of
//! the 1x1 channel controllers appended to backbone stages 3, 4 and 5.
//! Each width is drawn from `{K, 32, 64, 128, 256, 512}` where `K` is the
//! class count. Codes are ordered elementwise.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::arch::{ArchitectureCode, BlockConfig, LayerKind, STAGES};
use crate::latency::{Latency, LatencyTable, MissingKey};

pub const CC_WIDTHS: [u32; 5] = [32, 64, 128, 256, 512];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecoderParseError {
    #[error("decoder code `{0}` is not of the form `K:[C3,C4,C5]`")]
    Syntax(String),
    #[error("class count must be positive")]
    NoClasses,
    #[error("channel-controller width {width} is not K={classes} or one of 32..512")]
    Width { width: u32, classes: u32 },
}

/// Channel-controller widths for stages 3, 4 and 5, plus the class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecoderCode {
    classes: u32,
    cc: [u32; STAGES],
}

/// `{K} ∪ {32, 64, 128, 256, 512}`, ascending.
pub fn decoder_alphabet(classes: u32) -> Vec<u32> {
    let mut v: Vec<u32> = std::iter::once(classes).chain(CC_WIDTHS).collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl DecoderCode {
    pub fn new(classes: u32, cc: [u32; STAGES]) -> Result<Self, DecoderParseError> {
        if classes == 0 {
            return Err(DecoderParseError::NoClasses);
        }
        for width in cc {
            if width != classes && !CC_WIDTHS.contains(&width) {
                return Err(DecoderParseError::Width { width, classes });
            }
        }
        Ok(DecoderCode { classes, cc })
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn cc(&self) -> [u32; STAGES] {
        self.cc
    }
}

impl FromStr for DecoderCode {
    type Err = DecoderParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let syntax = || DecoderParseError::Syntax(s.to_string());
        let (k, rest) = compact.split_once(':').ok_or_else(syntax)?;
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(syntax)?;
        let classes: u32 = k.parse().map_err(|_| syntax())?;
        let widths: Vec<u32> = inner
            .split(',')
            .map(|t| t.parse().map_err(|_| syntax()))
            .collect::<Result<_, _>>()?;
        let cc: [u32; STAGES] = widths.try_into().map_err(|_| syntax())?;
        DecoderCode::new(classes, cc)
    }
}

impl fmt::Display for DecoderCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.cc;
        write!(f, "{}:[{a},{b},{c}]", self.classes)
    }
}

/// Strict elementwise order; codes for different class counts never compare.
pub fn decoder_precedes(x: &DecoderCode, y: &DecoderCode) -> bool {
    x.classes == y.classes && x != y && x.cc.iter().zip(y.cc).all(|(&a, b)| a <= b)
}

/// Every channel-controller setting for `classes`, sorted.
pub fn enumerate_decoder_space(classes: u32) -> Vec<DecoderCode> {
    let alphabet = decoder_alphabet(classes);
    let mut out = Vec::with_capacity(alphabet.len().pow(3));
    for &a in &alphabet {
        for &b in &alphabet {
            for &c in &alphabet {
                out.push(DecoderCode {
                    classes,
                    cc: [a, b, c],
                });
            }
        }
    }
    out
}

/// Prices a decoder by summing table entries for its channel controllers
/// and the two fusion steps (5 into 4, 4 into 3) plus the score-map classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderLatencyModel {
    /// Output channels of backbone stages 3, 4 and 5.
    pub backbone_channels: [u32; STAGES],
    pub input_h: u32,
    pub input_w: u32,
}

impl DecoderLatencyModel {
    pub fn for_backbone(backbone: &ArchitectureCode, input_h: u32, input_w: u32) -> Self {
        let kinds = backbone.kinds();
        let mut channels = [0; STAGES];
        for (s, ch) in channels.iter_mut().enumerate() {
            let last = *backbone.stage(s).last().expect("stages are non-empty");
            *ch = kinds[s].output_channels(last);
        }
        DecoderLatencyModel {
            backbone_channels: channels,
            input_h,
            input_w,
        }
    }

    fn size(&self, stage: usize) -> (u32, u32) {
        let shift = stage + 3;
        (self.input_h >> shift, self.input_w >> shift)
    }

    pub fn configs(&self, code: &DecoderCode) -> Vec<BlockConfig> {
        let at = |kind, c_in, (hi, wi): (u32, u32), c_out, (ho, wo): (u32, u32)| BlockConfig {
            kind,
            c_in,
            h_in: hi,
            w_in: wi,
            c_out,
            h_out: ho,
            w_out: wo,
        };
        let [c3, c4, c5] = code.cc;
        let (s3, s4, s5) = (self.size(0), self.size(1), self.size(2));
        let mut out = Vec::with_capacity(8);
        for (s, &c) in code.cc.iter().enumerate() {
            out.push(at(
                LayerKind::ChannelController,
                self.backbone_channels[s],
                self.size(s),
                c,
                self.size(s),
            ));
        }
        out.push(at(LayerKind::FusionProjection, c5, s5, c4, s5));
        out.push(at(LayerKind::FusionConv, 2 * c4, s4, c4, s4));
        out.push(at(LayerKind::FusionProjection, c4, s4, c3, s4));
        out.push(at(LayerKind::FusionConv, 2 * c3, s3, c3, s3));
        out.push(at(LayerKind::Head, c3, s3, code.classes, s3));
        out
    }

    pub fn estimate(
        &self,
        code: &DecoderCode,
        table: &LatencyTable,
    ) -> Result<Latency, MissingKey> {
        table.sum(&self.configs(code))
    }

    /// Every configuration the decoder space for `classes` can need.
    pub fn keys(&self, classes: u32) -> Vec<BlockConfig> {
        let mut keys: Vec<BlockConfig> = enumerate_decoder_space(classes)
            .iter()
            .flat_map(|c| self.configs(c))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}
