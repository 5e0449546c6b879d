use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::Latency;
use crate::arch::{ArchitectureCode, BlockConfig, LayerKind, ResolutionError};

pub const TABLE_HEADER: [&str; 8] = [
    "kind",
    "c_in",
    "h_in",
    "w_in",
    "c_out",
    "h_out",
    "w_out",
    "latency_ms",
];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: latency of {key} must be positive")]
    NonPositive { line: u64, key: BlockConfig },
    #[error("line {line}: duplicate entry for {key}")]
    Duplicate { line: u64, key: BlockConfig },
    #[error("latency table has no entries")]
    Empty,
}

/// A required layer configuration the table does not price.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MissingKey {
    #[error("latency table has no entry for {0}")]
    Entry(BlockConfig),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
}

/// Free-form provenance read from `# key: value` comment lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableMeta {
    pub platform: Option<String>,
    pub resolution: Option<u32>,
    pub tool: Option<String>,
}

/// Profiled per-layer latencies keyed by [`BlockConfig`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LatencyTable {
    entries: BTreeMap<BlockConfig, Latency>,
    pub meta: TableMeta,
}

impl LatencyTable {
    /// Builds a table from in-memory entries. Zero latencies and repeated
    /// keys are rejected like they are on load.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (BlockConfig, Latency)>,
    ) -> Result<Self, TableError> {
        let mut map = BTreeMap::new();
        for (i, (key, lat)) in entries.into_iter().enumerate() {
            let line = i as u64 + 1;
            if lat.is_zero() {
                return Err(TableError::NonPositive { line, key });
            }
            if map.insert(key, lat).is_some() {
                return Err(TableError::Duplicate { line, key });
            }
        }
        if map.is_empty() {
            return Err(TableError::Empty);
        }
        Ok(LatencyTable {
            entries: map,
            meta: TableMeta::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut meta = TableMeta::default();
        for line in text.lines() {
            let Some(comment) = line.trim_start().strip_prefix('#') else {
                continue;
            };
            if let Some((k, v)) = comment.split_once(':') {
                let v = v.trim().to_string();
                match k.trim() {
                    "platform" => meta.platform = Some(v),
                    "tool" => meta.tool = Some(v),
                    "resolution" => meta.resolution = v.parse().ok(),
                    _ => {}
                }
            }
        }

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| TableError::Malformed {
            line: 1,
            msg: e.to_string(),
        })?;
        if !headers.is_empty() && headers.iter().ne(TABLE_HEADER) {
            return Err(TableError::Malformed {
                line: headers.position().map_or(1, |p| p.line()),
                msg: format!("expected header `{}`", TABLE_HEADER.join(",")),
            });
        }

        let mut entries = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| TableError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let malformed = |msg: String| TableError::Malformed { line, msg };
            if row.len() != TABLE_HEADER.len() {
                return Err(malformed(format!(
                    "expected {} fields, found {}",
                    TABLE_HEADER.len(),
                    row.len()
                )));
            }
            let kind: LayerKind = row[0].parse().map_err(malformed)?;
            let mut dims = [0u32; 6];
            for (i, d) in dims.iter_mut().enumerate() {
                let field = &row[i + 1];
                *d = field.parse().ok().filter(|&v| v > 0).ok_or_else(|| {
                    malformed(format!(
                        "`{}` must be a positive integer, got `{field}`",
                        TABLE_HEADER[i + 1]
                    ))
                })?;
            }
            let key = BlockConfig {
                kind,
                c_in: dims[0],
                h_in: dims[1],
                w_in: dims[2],
                c_out: dims[3],
                h_out: dims[4],
                w_out: dims[5],
            };
            let latency: Latency = match row[7].parse() {
                Ok(l) => l,
                Err(_) if row[7].trim_start().starts_with('-') => {
                    return Err(TableError::NonPositive { line, key })
                }
                Err(e) => return Err(malformed(e.to_string())),
            };
            if latency.is_zero() {
                return Err(TableError::NonPositive { line, key });
            }
            if entries.insert(key, latency).is_some() {
                return Err(TableError::Duplicate { line, key });
            }
        }
        if entries.is_empty() {
            return Err(TableError::Empty);
        }
        Ok(LatencyTable { entries, meta })
    }

    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        if let Some(p) = &self.meta.platform {
            writeln!(out, "# platform: {p}")?;
        }
        if let Some(r) = self.meta.resolution {
            writeln!(out, "# resolution: {r}")?;
        }
        if let Some(t) = &self.meta.tool {
            writeln!(out, "# tool: {t}")?;
        }
        writeln!(out, "{}", TABLE_HEADER.join(","))?;
        for (k, v) in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                k.kind, k.c_in, k.h_in, k.w_in, k.c_out, k.h_out, k.w_out, v
            )?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &BlockConfig) -> Option<Latency> {
        self.entries.get(key).copied()
    }

    pub fn lookup(&self, key: &BlockConfig) -> Result<Latency, MissingKey> {
        self.get(key).ok_or(MissingKey::Entry(*key))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BlockConfig, Latency)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// Sum of the table entries for `configs`.
    pub fn sum(&self, configs: &[BlockConfig]) -> Result<Latency, MissingKey> {
        configs.iter().map(|c| self.lookup(c)).sum()
    }

    /// Pairs of entries that differ only in channel counts where the wider
    /// one is strictly faster.
    pub fn audit_monotonicity(&self) -> AuditReport {
        let mut groups: BTreeMap<_, Vec<(&BlockConfig, Latency)>> = BTreeMap::new();
        for (k, v) in self.iter() {
            groups.entry(k.spatial_key()).or_default().push((k, v));
        }
        let mut violations = Vec::new();
        for group in groups.values() {
            for &(a, la) in group {
                for &(b, lb) in group {
                    let wider = a.c_in <= b.c_in && a.c_out <= b.c_out && a != b;
                    if wider && lb < la {
                        violations.push(MonotonicityViolation {
                            narrower: *a,
                            narrower_latency: la,
                            wider: *b,
                            wider_latency: lb,
                        });
                    }
                }
            }
        }
        AuditReport {
            entries: self.len(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityViolation {
    pub narrower: BlockConfig,
    pub narrower_latency: Latency,
    pub wider: BlockConfig,
    pub wider_latency: Latency,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub entries: usize,
    pub violations: Vec<MonotonicityViolation>,
}

impl AuditReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Whole-network latency: the sum of every layer's table entry.
pub fn estimate_latency(
    code: &ArchitectureCode,
    table: &LatencyTable,
    resolution: u32,
    num_classes: u32,
) -> Result<Latency, MissingKey> {
    let configs = code.block_configs(resolution, num_classes)?;
    table.sum(&configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::LayerKind::*;

    const HEADER: &str = "kind,c_in,h_in,w_in,c_out,h_out,w_out,latency_ms\n";

    fn l(s: &str) -> Latency {
        s.parse().unwrap()
    }

    fn hand_table() -> LatencyTable {
        let text = format!(
            "# platform: TX2\n# resolution: 224\n{HEADER}\
             stem_conv,3,224,224,32,112,112,0.1\n\
             stem_conv,32,112,112,64,56,56,0.143\n\
             basic_block,64,56,56,64,28,28,0.2\n\
             basic_block,64,28,28,64,14,14,0.15\n\
             basic_block,64,14,14,64,7,7,0.1\n\
             head,64,7,7,1000,1,1,0.05\n"
        );
        LatencyTable::parse(&text).unwrap()
    }

    #[test]
    fn loads_rows_and_metadata() {
        let t = hand_table();
        assert_eq!(t.len(), 6);
        assert_eq!(t.meta.platform.as_deref(), Some("TX2"));
        assert_eq!(t.meta.resolution, Some(224));
        let key = BlockConfig::square(StemConv, 32, 112, 64, 56);
        assert_eq!(t.get(&key), Some(l("0.143")));
    }

    #[test]
    fn six_entry_estimate_is_exact() {
        let code: ArchitectureCode = "[(64),(64),(64)]".parse().unwrap();
        let t = hand_table();
        assert_eq!(estimate_latency(&code, &t, 224, 1000).unwrap(), l("0.743"));
    }

    #[test]
    fn missing_key_is_named() {
        let code: ArchitectureCode = "[(64),(64),(128)]".parse().unwrap();
        let err = estimate_latency(&code, &hand_table(), 224, 1000).unwrap_err();
        assert_eq!(
            err,
            MissingKey::Entry(BlockConfig::square(BasicBlock, 64, 14, 128, 7))
        );
        assert!(err.to_string().contains("basic_block(64,14,14,128,7,7)"));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(LatencyTable::parse(""), Err(TableError::Empty)));
        assert!(matches!(
            LatencyTable::parse(HEADER),
            Err(TableError::Empty)
        ));
        let neg = format!("{HEADER}stem_conv,3,224,224,32,112,112,-1\n");
        assert!(matches!(
            LatencyTable::parse(&neg),
            Err(TableError::NonPositive { line: 2, .. })
        ));
        let zero = format!("{HEADER}stem_conv,3,224,224,32,112,112,0\n");
        assert!(matches!(
            LatencyTable::parse(&zero),
            Err(TableError::NonPositive { .. })
        ));
        let dup = format!(
            "{HEADER}stem_conv,3,224,224,32,112,112,0.1\nstem_conv,3,224,224,32,112,112,0.2\n"
        );
        assert!(matches!(
            LatencyTable::parse(&dup),
            Err(TableError::Duplicate { line: 3, .. })
        ));
        let short = format!("{HEADER}stem_conv,3,224,224,32,112,0.1\n");
        assert!(matches!(
            LatencyTable::parse(&short),
            Err(TableError::Malformed { .. })
        ));
        let kind = format!("{HEADER}conv,3,224,224,32,112,112,0.1\n");
        assert!(matches!(
            LatencyTable::parse(&kind),
            Err(TableError::Malformed { .. })
        ));
        let header = "a,b\nstem_conv,3,224,224,32,112,112,0.1\n";
        assert!(matches!(
            LatencyTable::parse(header),
            Err(TableError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_parse() {
        let t = hand_table();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(
            LatencyTable::parse(std::str::from_utf8(&buf).unwrap()).unwrap(),
            t
        );
    }

    #[test]
    fn audit_flags_faster_wider_entry() {
        let t = LatencyTable::from_entries([
            (BlockConfig::square(BasicBlock, 64, 28, 64, 28), l("0.3")),
            (BlockConfig::square(BasicBlock, 128, 28, 128, 28), l("0.2")),
            (BlockConfig::square(BasicBlock, 128, 14, 128, 14), l("0.01")),
        ])
        .unwrap();
        let report = t.audit_monotonicity();
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!((v.narrower.c_in, v.wider.c_in), (64, 128));
        assert!(!report.is_monotone());
    }

    #[test]
    fn audit_clean_cases() {
        let single =
            LatencyTable::from_entries([(BlockConfig::square(Head, 64, 7, 10, 1), l("1"))])
                .unwrap();
        assert!(single.audit_monotonicity().is_monotone());
        assert!(hand_table().audit_monotonicity().is_monotone());
    }
}
