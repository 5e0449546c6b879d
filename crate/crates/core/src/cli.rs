//! The `pop` command line.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 evaluator failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arch::{ArchitectureCode, BlockKind, Stem, WidthAlphabet, STAGES};
use crate::decoder::{DecoderCode, DecoderLatencyModel};
use crate::eval::{
    CapacityMass, Evaluator, ExternalCommand, ReplayEvaluator, SyntheticOracle,
    SyntheticOracleParams,
};
use crate::latency::{
    enumerate_subspace, estimate_latency, EnumerateError, Latency, LatencyBand, LatencyTable,
    SubspaceQuery, SyntheticTable,
};
use crate::order::precedes;
use crate::records::{load_latencies, load_records, write_history, write_records, RecordsError};
use crate::search::{
    bin_frontier, check_assumption, frontier, pop_search, BackboneSpace, DecoderLatencySource,
    DecoderSpace, SearchConfig, SearchError, SearchOutcome, SelectionStrategy, TrainedRecord,
};

#[derive(Debug, Parser)]
#[command(
    name = "pop",
    version,
    about = "Latency-constrained architecture search with partial order pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the latency of one backbone from a table.
    Latency {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 224)]
        resolution: u32,
        #[arg(long, default_value_t = 1000)]
        classes: u32,
        #[arg(long)]
        alphabet: Option<WidthAlphabet>,
    },
    /// List every backbone whose latency lies in [min-ms, max-ms].
    Enumerate {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "0")]
        min_ms: Latency,
        #[arg(long)]
        max_ms: Latency,
        #[command(flatten)]
        backbone: BackboneArgs,
        /// Write `code,latency_ms` here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print whether `a` strictly precedes `b`.
    Precedes {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        alphabet: Option<WidthAlphabet>,
    },
    /// Count the precedents of a backbone inside a space.
    Precedents {
        #[arg(long)]
        arch: String,
        /// A `code,latency_ms[,accuracy]` file listing the space.
        #[arg(long, conflicts_with_all = ["table", "band"])]
        space_file: Option<PathBuf>,
        #[arg(long, requires = "band")]
        table: Option<PathBuf>,
        #[arg(long)]
        band: Option<LatencyBand>,
        #[command(flatten)]
        backbone: BackboneArgs,
        /// Also print the precedents, one per line.
        #[arg(long)]
        list: bool,
    },
    /// Run the search and write frontier, history, records and statistics.
    Search(Box<SearchArgs>),
    /// Print the trained records nothing beats on both latency and accuracy.
    Frontier {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = SpaceKind::Backbone)]
        space: SpaceKind,
        /// Keep only the most accurate member per latency bin of this width.
        #[arg(long)]
        bin_ms: Option<Latency>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure how often larger architectures are slower and more accurate.
    CheckAssumption {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = SpaceKind::Backbone)]
        space: SpaceKind,
        /// Write per-pair deltas here.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// List entry pairs where more output channels are not slower.
    AuditTable {
        #[arg(long)]
        table: PathBuf,
    },
    /// Write a generated latency table from a multiply-accumulate cost model.
    SynthTable {
        #[arg(long)]
        alphabet: Option<WidthAlphabet>,
        /// Block kinds to price, comma separated.
        #[arg(long, default_value = "basic")]
        kinds: String,
        #[arg(long, env = "POP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 224)]
        resolution: u32,
        #[arg(long, default_value_t = 1000)]
        classes: u32,
        /// Also price the decoder space on top of this backbone.
        #[arg(long)]
        decoder_backbone: Option<String>,
        #[arg(long, default_value_t = 19)]
        decoder_classes: u32,
        #[arg(long, default_value_t = 1024)]
        height: u32,
        #[arg(long, default_value_t = 2048)]
        width: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpaceKind {
    Backbone,
    Decoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Uniform,
    PrecedentWeighted,
}

#[derive(Debug, Args)]
struct BackboneArgs {
    #[arg(long)]
    alphabet: Option<WidthAlphabet>,
    /// One block kind, or three comma separated (stages 3, 4, 5).
    #[arg(long, default_value = "basic")]
    kind: String,
    #[arg(long, default_value_t = 32)]
    max_blocks: usize,
    #[arg(long, default_value_t = 224)]
    resolution: u32,
    #[arg(long, default_value_t = 1000)]
    classes: u32,
    /// Give up when the space holds more members than this.
    #[arg(long, default_value_t = 1_000_000)]
    limit: usize,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = SpaceKind::Backbone)]
    space: SpaceKind,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    band: Option<LatencyBand>,
    /// `synthetic`, `replay:FILE` or `cmd:COMMAND`.
    #[arg(long, default_value = "synthetic")]
    evaluator: String,
    #[arg(long, env = "POP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Uniform)]
    strategy: Strategy,
    /// Draw candidates by rejection sampling instead of enumerating the band.
    #[arg(long)]
    sampled: bool,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long)]
    bin_ms: Option<Latency>,
    #[command(flatten)]
    backbone: BackboneArgs,
    #[arg(long, default_value_t = 0.8)]
    a_max: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Seconds before an external command is killed.
    #[arg(long)]
    timeout: Option<f64>,
    /// Allow several external commands to run at once.
    #[arg(long)]
    parallel: bool,
    /// Per-code decoder latencies (`code,latency_ms`), instead of a table.
    #[arg(long, conflicts_with = "table")]
    decoder_latency: Option<PathBuf>,
    /// Backbone the decoder is attached to, when pricing from a table.
    #[arg(long)]
    backbone_code: Option<String>,
    #[arg(long, default_value_t = 19)]
    decoder_classes: u32,
    #[arg(long, default_value_t = 1024)]
    height: u32,
    #[arg(long, default_value_t = 2048)]
    width: u32,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Evaluator(String),
}

impl CliError {
    fn status(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Evaluator(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Evaluator(m) => m,
        }
    }
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        data(e)
    }
}

impl From<RecordsError> for CliError {
    fn from(e: RecordsError) -> Self {
        data(e)
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(_) => usage(e),
            SearchError::Evaluator { .. } => CliError::Evaluator(e.to_string()),
            SearchError::EmptySpace | SearchError::Space { .. } => data(e),
        }
    }
}

impl From<EnumerateError> for CliError {
    fn from(e: EnumerateError) -> Self {
        match e {
            EnumerateError::TooLarge(n) => data(format!(
                "the space holds more than {n} architectures; narrow the band or raise --limit"
            )),
            EnumerateError::Missing(m) => data(m),
        }
    }
}

/// Runs `pop` with the process arguments and standard streams.
pub fn run() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs `pop` with explicit arguments (program name first) and streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if status == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return status;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.status()
        }
    }
}

fn load_table(path: &Path) -> Result<LatencyTable, CliError> {
    LatencyTable::load(path).map_err(data)
}

fn parse_code(text: &str, alphabet: &Option<WidthAlphabet>) -> Result<ArchitectureCode, CliError> {
    let alphabet = alphabet.clone().unwrap_or_default();
    ArchitectureCode::parse_with(text, &alphabet).map_err(|e| usage(format!("`{text}`: {e}")))
}

fn parse_kinds(text: &str) -> Result<[BlockKind; STAGES], CliError> {
    let kinds: Vec<BlockKind> = text
        .split(',')
        .map(|k| k.trim().parse().map_err(usage))
        .collect::<Result<_, _>>()?;
    match kinds.as_slice() {
        [k] => Ok([*k; STAGES]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(usage(format!(
            "--kind takes one or {STAGES} block kinds, got `{text}`"
        ))),
    }
}

fn query<'a>(
    table: &'a LatencyTable,
    band: LatencyBand,
    args: &BackboneArgs,
) -> Result<SubspaceQuery<'a>, CliError> {
    let mut q = SubspaceQuery::new(table, band);
    q.alphabet = args.alphabet.clone().unwrap_or_default();
    q.kinds = parse_kinds(&args.kind)?;
    q.stem = Stem::default();
    q.resolution = args.resolution;
    q.num_classes = args.classes;
    q.max_blocks_per_stage = args.max_blocks;
    q.limit = Some(args.limit);
    Ok(q)
}

fn open_out<'a>(
    path: &Option<PathBuf>,
    out: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(out),
    })
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Latency {
            table,
            arch,
            resolution,
            classes,
            alphabet,
        } => {
            let table = load_table(&table)?;
            let code = parse_code(&arch, &alphabet)?;
            let lat = estimate_latency(&code, &table, resolution, classes).map_err(data)?;
            writeln!(out, "{lat}")?;
        }
        Command::Enumerate {
            table,
            min_ms,
            max_ms,
            backbone,
            out: path,
        } => {
            let band = LatencyBand::new(min_ms, max_ms)
                .ok_or_else(|| usage("--min-ms exceeds --max-ms"))?;
            let table = load_table(&table)?;
            let found = enumerate_subspace(&query(&table, band, &backbone)?)?;
            let mut w = csv::Writer::from_writer(open_out(&path, out)?);
            w.write_record(["code", "latency_ms"]).map_err(data)?;
            for (code, lat) in &found {
                w.write_record([code.to_string(), lat.to_string()])
                    .map_err(data)?;
            }
            w.flush()?;
            writeln!(err, "{} architectures", found.len())?;
        }
        Command::Precedes { a, b, alphabet } => {
            let a = parse_code(&a, &alphabet)?;
            let b = parse_code(&b, &alphabet)?;
            writeln!(out, "{}", precedes(&a, &b))?;
        }
        Command::Precedents {
            arch,
            space_file,
            table,
            band,
            backbone,
            list,
        } => {
            let code = parse_code(&arch, &backbone.alphabet)?;
            let space: Vec<ArchitectureCode> = match (space_file, table, band) {
                (Some(file), _, _) => load_latencies::<ArchitectureCode>(&file)?
                    .into_iter()
                    .map(|(c, _)| c)
                    .collect(),
                (None, Some(table), Some(band)) => {
                    let table = load_table(&table)?;
                    enumerate_subspace(&query(&table, band, &backbone)?)?
                        .into_iter()
                        .map(|(c, _)| c)
                        .collect()
                }
                _ => return Err(usage("give either --space-file or --table with --band")),
            };
            let found: Vec<&ArchitectureCode> =
                space.iter().filter(|m| precedes(m, &code)).collect();
            writeln!(out, "{}", found.len())?;
            if list {
                for m in found {
                    writeln!(out, "{m}")?;
                }
            }
        }
        Command::Search(args) => search(*args, out)?,
        Command::Frontier {
            records,
            space,
            bin_ms,
            out: path,
        } => match space {
            SpaceKind::Backbone => {
                write_frontier::<ArchitectureCode>(&records, bin_ms, &path, out)?
            }
            SpaceKind::Decoder => write_frontier::<DecoderCode>(&records, bin_ms, &path, out)?,
        },
        Command::CheckAssumption {
            records,
            space,
            pairs,
        } => match space {
            SpaceKind::Backbone => assumption::<ArchitectureCode>(&records, precedes, &pairs, out)?,
            SpaceKind::Decoder => {
                assumption::<DecoderCode>(&records, crate::decoder::decoder_precedes, &pairs, out)?
            }
        },
        Command::AuditTable { table } => {
            let report = load_table(&table)?.audit_monotonicity();
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "narrower",
                "narrower_latency_ms",
                "wider",
                "wider_latency_ms",
            ])
            .map_err(data)?;
            for v in &report.violations {
                w.write_record([
                    v.narrower.to_string(),
                    v.narrower_latency.to_string(),
                    v.wider.to_string(),
                    v.wider_latency.to_string(),
                ])
                .map_err(data)?;
            }
            w.flush()?;
            writeln!(
                err,
                "{} violations among {} entries",
                report.violations.len(),
                report.entries
            )?;
        }
        Command::SynthTable {
            alphabet,
            kinds,
            seed,
            resolution,
            classes,
            decoder_backbone,
            decoder_classes,
            height,
            width,
            out: path,
        } => {
            let alphabet = alphabet.unwrap_or_default();
            let mut spec = SyntheticTable::tx2_like(alphabet.clone()).with_seed(seed);
            spec.kinds = kinds
                .split(',')
                .map(|k| k.trim().parse().map_err(usage))
                .collect::<Result<_, _>>()?;
            spec.resolution = resolution;
            spec.num_classes = classes;
            let mut keys = spec.keys();
            if let Some(text) = decoder_backbone {
                let backbone = parse_code(&text, &Some(alphabet))?;
                keys.extend(
                    DecoderLatencyModel::for_backbone(&backbone, height, width)
                        .keys(decoder_classes),
                );
            }
            let table = spec.price(keys);
            let mut file = io::BufWriter::new(
                fs::File::create(&path).map_err(|e| data(format!("{}: {e}", path.display())))?,
            );
            table.write_to(&mut file)?;
            file.flush()?;
            writeln!(err, "{} entries", table.len())?;
        }
    }
    Ok(())
}

fn write_frontier<E>(
    records: &Path,
    bin: Option<Latency>,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), CliError>
where
    E: Clone + Ord + Display + FromStr,
    E::Err: Display,
{
    let records: Vec<TrainedRecord<E>> = load_records(records)?;
    let f = frontier(&records);
    let members = match bin {
        Some(width) if width.is_zero() => return Err(usage("--bin-ms must be positive")),
        Some(width) => bin_frontier(&f, width),
        None => f.members,
    };
    let mut w = open_out(path, out)?;
    write_records(&members, &mut w)?;
    w.flush()?;
    Ok(())
}

fn assumption<E>(
    records: &Path,
    order: fn(&E, &E) -> bool,
    pairs: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), CliError>
where
    E: Clone + Display + FromStr,
    E::Err: Display,
{
    let records: Vec<TrainedRecord<E>> = load_records(records)?;
    let report = check_assumption(&records, order);
    if let Some(path) = pairs {
        let file = fs::File::create(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
        w.write_record(["lower", "upper", "delta_latency_ms", "delta_accuracy"])
            .map_err(data)?;
        for p in &report.pairs {
            w.write_record([
                p.lower.to_string(),
                p.upper.to_string(),
                p.delta_latency_ms.to_string(),
                p.delta_accuracy.to_string(),
            ])
            .map_err(data)?;
        }
        w.flush()?;
    }
    serde_json::to_writer_pretty(&mut *out, &report.summary).map_err(data)?;
    writeln!(out)?;
    Ok(())
}

fn evaluator<E>(args: &SearchArgs) -> Result<Box<dyn Evaluator<E> + Sync>, CliError>
where
    E: CapacityMass + Display + FromStr + 'static,
    E::Err: Display,
{
    let spec = args.evaluator.as_str();
    if spec == "synthetic" {
        let params = SyntheticOracleParams {
            a_max: args.a_max,
            gamma: args.gamma,
            noise_sigma: args.noise,
            seed: args.seed,
        };
        return Ok(Box::new(SyntheticOracle::new(params).map_err(usage)?));
    }
    if let Some(file) = spec.strip_prefix("replay:") {
        let records: Vec<TrainedRecord<E>> = load_records(Path::new(file))?;
        let replay = ReplayEvaluator::new(records.into_iter().map(|r| (r.code, r.accuracy)))
            .map_err(data)?;
        return Ok(Box::new(replay));
    }
    if let Some(command) = spec.strip_prefix("cmd:") {
        let timeout = match args.timeout {
            Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
            Some(s) => return Err(usage(format!("--timeout must be positive, got {s}"))),
            None => None,
        };
        return Ok(Box::new(ExternalCommand {
            command: command.to_string(),
            timeout,
            parallel: args.parallel,
        }));
    }
    Err(usage(format!(
        "unknown evaluator `{spec}`; use synthetic, replay:FILE or cmd:COMMAND"
    )))
}

fn search(args: SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = SearchConfig {
        seed: args.seed,
        patience: args.patience,
        max_evaluations: args.max_evals,
        strategy: match args.strategy {
            Strategy::Uniform => SelectionStrategy::Uniform,
            Strategy::PrecedentWeighted => SelectionStrategy::PrecedentWeighted,
        },
        batch_size: args.batch,
        ..SearchConfig::default()
    };
    match args.space {
        SpaceKind::Backbone => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| usage("--table is required for a backbone search"))?;
            let table = load_table(path)?;
            let band = args.band.unwrap_or_else(LatencyBand::unbounded);
            let q = query(&table, band, &args.backbone)?;
            let space = if args.sampled {
                BackboneSpace::sampled(&q)
            } else {
                BackboneSpace::materialize(&q)?
            };
            let eval = evaluator::<ArchitectureCode>(&args)?;
            let outcome = pop_search(&space, &*eval, &config)?;
            export(&args, &outcome, out)
        }
        SpaceKind::Decoder => {
            if args.sampled {
                return Err(usage(
                    "the decoder space is always enumerated; drop --sampled",
                ));
            }
            let source = match (&args.decoder_latency, &args.table) {
                (Some(file), _) => {
                    let rows: Vec<(DecoderCode, Latency)> = load_latencies(file)?;
                    DecoderLatencySource::PerCode(rows.into_iter().collect::<BTreeMap<_, _>>())
                }
                (None, Some(table)) => {
                    let text = args.backbone_code.as_ref().ok_or_else(|| {
                        usage("--backbone-code is required when pricing decoders from a table")
                    })?;
                    let backbone = parse_code(text, &args.backbone.alphabet)?;
                    DecoderLatencySource::Table {
                        model: DecoderLatencyModel::for_backbone(
                            &backbone,
                            args.height,
                            args.width,
                        ),
                        table: load_table(table)?,
                    }
                }
                (None, None) => {
                    return Err(usage(
                        "give --table or --decoder-latency for a decoder search",
                    ))
                }
            };
            let space =
                DecoderSpace::new(args.decoder_classes, &source, args.band).map_err(data)?;
            let eval = evaluator::<DecoderCode>(&args)?;
            let outcome = pop_search(&space, &*eval, &config)?;
            export(&args, &outcome, out)
        }
    }
}

fn export<E>(
    args: &SearchArgs,
    outcome: &SearchOutcome<E>,
    out: &mut dyn Write,
) -> Result<(), CliError>
where
    E: Clone + Ord + Display,
{
    let dir = &args.out;
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    let create = |name: &str| -> Result<io::BufWriter<fs::File>, CliError> {
        let p = dir.join(name);
        fs::File::create(&p)
            .map(io::BufWriter::new)
            .map_err(|e| data(format!("{}: {e}", p.display())))
    };
    let members = match args.bin_ms {
        Some(w) if w.is_zero() => return Err(usage("--bin-ms must be positive")),
        Some(w) => bin_frontier(&outcome.frontier, w),
        None => outcome.frontier.members.clone(),
    };
    let mut f = create("frontier.csv")?;
    write_records(&members, &mut f)?;
    f.flush()?;
    let mut f = create("history.csv")?;
    write_history(&outcome.history, &mut f)?;
    f.flush()?;
    let mut f = create("records.csv")?;
    write_records(&outcome.records, &mut f)?;
    f.flush()?;
    let mut f = create("statistics.json")?;
    serde_json::to_writer_pretty(&mut f, &outcome.statistics).map_err(data)?;
    writeln!(f)?;
    f.flush()?;

    let s = &outcome.statistics;
    let pruned = s.pruned.map_or_else(|| "NA".to_string(), |p| p.to_string());
    writeln!(
        out,
        "trained {} pruned {} frontier {} stop {}",
        s.trained, pruned, s.frontier_size, s.stop_reason
    )?;
    Ok(())
}
