//! Command-line front end: `score`, `stack` and `benchmark`.
//!
//! Every command prints one JSON document (to stdout or `--output`). Exit
//! codes: 0 success, 2 argument errors, 3 format or I/O errors, 4 numerical
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{run_benchmark, score_files, DatasetManifest, FormatHint};
use crate::compensate::{CompensationConfig, CompensationMode, QualityReport};
use crate::display::{decompose, plan_windows, DisplayModel, WindowPlan};
use crate::error::{Error, Result};
use crate::imageio::{read_hdr, sniff, write_ldr, FileKind, HdrFormat};
use crate::metrics::BaseMetric;
use crate::pooling::{AggregationConfig, DEFAULT_EPSILON};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ARGUMENT: i32 = 2;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HDRIQA_THREADS";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "hdriqa", version, about = "Full-reference HDR image quality assessment")]
pub struct Cli {
    /// Print a human-readable summary to stderr (repeat for debug logging).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score a test image against a reference.
    Score(ScoreArgs),
    /// Export the exposure stack of an HDR image as PNG files.
    Stack(StackArgs),
    /// Score every pair in a CSV manifest and correlate with MOS.
    Benchmark(BenchmarkArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Mae,
    Psnr,
    Ssim,
    Lpips,
    Dists,
}

impl From<MetricArg> for BaseMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mae => BaseMetric::Mae,
            MetricArg::Psnr => BaseMetric::PsnrMse,
            MetricArg::Ssim => BaseMetric::ssim(),
            MetricArg::Lpips => BaseMetric::Lpips,
            MetricArg::Dists => BaseMetric::Dists,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    None,
    Optimize,
    Paired,
}

impl From<ModeArg> for CompensationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => CompensationMode::None,
            ModeArg::Optimize => CompensationMode::Optimize,
            ModeArg::Paired => CompensationMode::Paired,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Auto,
    Rgbe,
    Pfm,
    Png,
}

impl From<FormatArg> for FormatHint {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => FormatHint::Auto,
            FormatArg::Rgbe => FormatHint::Rgbe,
            FormatArg::Pfm => FormatHint::Pfm,
            FormatArg::Png => FormatHint::Png,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct DisplayArgs {
    /// Display gamma.
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
    /// Black-level fraction of the display.
    #[arg(long = "black-level", default_value_t = 1.0 / 128.0)]
    pub black_level: f64,
    /// Display peak luminance, cd/m².
    #[arg(long, default_value_t = 200.0)]
    pub lmax: f64,
    /// Display black luminance, cd/m².
    #[arg(long, default_value_t = 1.0)]
    pub lmin: f64,
}

impl DisplayArgs {
    fn model(&self) -> Result<DisplayModel> {
        DisplayModel::new(self.gamma, self.black_level, self.lmin, self.lmax)
    }
}

#[derive(Args, Debug, Clone)]
pub struct ScoringArgs {
    /// Base LDR metric.
    #[arg(long, value_enum, default_value_t = MetricArg::Ssim)]
    pub metric: MetricArg,
    /// Luminance-shift compensation mode.
    #[arg(long, value_enum, default_value_t = ModeArg::None)]
    pub compensate: ModeArg,
    /// Exposure search half-width, stops.
    #[arg(long = "search-halfwidth", default_value_t = 4.0)]
    pub search_halfwidth: f64,
    /// Exposure search tolerance, stops.
    #[arg(long = "tol", default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Objective evaluation budget per window.
    #[arg(long = "max-evals", default_value_t = 200)]
    pub max_evals: usize,
    /// Weight given to badly exposed pixels.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Comma-separated per-window weights summing to 1 (default uniform).
    #[arg(long = "global-weights")]
    pub global_weights: Option<String>,
    #[command(flatten)]
    pub display: DisplayArgs,
}

impl ScoringArgs {
    fn compensation(&self) -> Result<CompensationConfig> {
        let c = CompensationConfig {
            mode: self.compensate.into(),
            search_halfwidth: self.search_halfwidth,
            tolerance: self.tolerance,
            max_evals: self.max_evals,
        };
        c.validate()?;
        Ok(c)
    }

    fn aggregation(&self) -> Result<AggregationConfig> {
        let agg = match &self.global_weights {
            Some(list) => AggregationConfig::parse(list)?,
            None => AggregationConfig::default(),
        };
        agg.with_epsilon(self.epsilon)
    }

    fn metric(&self) -> Result<BaseMetric> {
        let m: BaseMetric = self.metric.into();
        m.check_supported()?;
        Ok(m)
    }
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    /// Input format for both files.
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StackArgs {
    pub hdr: PathBuf,
    pub out_dir: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    #[command(flatten)]
    pub display: DisplayArgs,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    pub manifest: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConfigEcho {
    display: DisplayModel,
    compensation: CompensationConfig,
    pooling: AggregationConfig,
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    schema_version: u32,
    reference: &'a Path,
    test: &'a Path,
    #[serde(flatten)]
    report: &'a QualityReport,
    config: ConfigEcho,
}

#[derive(Serialize)]
struct StackOutput<'a> {
    schema_version: u32,
    source: &'a Path,
    display: DisplayModel,
    window_size_stops: f64,
    plan: &'a WindowPlan,
    files: Vec<String>,
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// `score`: compares two images and prints the report.
pub fn cmd_score(args: &ScoreArgs, verbose: bool) -> Result<QualityReport> {
    let metric = args.scoring.metric()?;
    let model = args.scoring.display.model()?;
    let comp = args.scoring.compensation()?;
    let agg = args.scoring.aggregation()?;
    let report = score_files(
        &args.reference,
        &args.test,
        args.format.into(),
        &metric,
        &model,
        &comp,
        &agg,
    )?;
    if verbose {
        eprintln!(
            "{} {} Q = {:.6} over {} window(s)",
            report.metric,
            report.mode,
            report.score,
            report.per_window.len()
        );
        for w in &report.per_window {
            eprintln!(
                "  k={} v={:.6e} v_hat={:.6e} Q_k={:.6}",
                w.k, w.v, w.v_hat, w.q_final
            );
        }
    }
    let out = ScoreOutput {
        schema_version: SCHEMA_VERSION,
        reference: &args.reference,
        test: &args.test,
        report: &report,
        config: ConfigEcho {
            display: model,
            compensation: comp,
            pooling: agg,
        },
    };
    emit(&out, args.output.as_deref())?;
    Ok(report)
}

/// File name for window `k` (1-based) rendered at `gain`.
pub fn stack_file_name(k: usize, gain: f64) -> String {
    format!("stack_k{k}_v{gain:.6e}.png")
}

/// `stack`: writes one PNG per exposure window plus a `stack.json` sidecar.
pub fn cmd_stack(args: &StackArgs, verbose: bool) -> Result<Vec<PathBuf>> {
    let model = args.display.model()?;
    let format = match FormatHint::from(args.format) {
        FormatHint::Rgbe => HdrFormat::Rgbe,
        FormatHint::Pfm => HdrFormat::Pfm,
        FormatHint::Png => {
            return Err(Error::invalid("stack needs an HDR input"));
        }
        _ => match sniff(&args.hdr)? {
            FileKind::Hdr(f) => f,
            FileKind::Ldr => return Err(Error::invalid("stack needs an HDR input")),
        },
    };
    let hdr = read_hdr(&args.hdr, format)?;
    let plan = plan_windows(&hdr, &model)?;
    let stack = decompose(&hdr, &plan, &model)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let mut paths = Vec::new();
    let mut names = Vec::new();
    for (k, exposure) in stack.exposures.iter().enumerate() {
        let name = stack_file_name(k + 1, exposure.gain);
        let path = args.out_dir.join(&name);
        write_ldr(&exposure.image, &path)?;
        if verbose {
            eprintln!("wrote {}", path.display());
        }
        paths.push(path);
        names.push(name);
    }
    let sidecar = StackOutput {
        schema_version: SCHEMA_VERSION,
        source: &args.hdr,
        display: model,
        window_size_stops: model.window_size_stops(),
        plan: &plan,
        files: names,
    };
    emit(&sidecar, Some(&args.out_dir.join("stack.json")))?;
    Ok(paths)
}

/// `benchmark`: scores a manifest and prints the correlation report.
pub fn cmd_benchmark(args: &BenchmarkArgs, verbose: bool) -> Result<crate::bench::BenchmarkReport> {
    let metric = args.scoring.metric()?;
    let model = args.scoring.display.model()?;
    let comp = args.scoring.compensation()?;
    let agg = args.scoring.aggregation()?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let report = run_benchmark(&manifest, &metric, &model, &comp, &agg)?;
    if verbose {
        eprintln!(
            "{}: {} scored, {} failed, SRCC {:?}, PLCC {:?}",
            report.name,
            report.entries.len(),
            report.failures.len(),
            report.srcc,
            report.plcc
        );
    }
    emit(&report, args.output.as_deref())?;
    Ok(report)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV}={value:?} is not a thread count")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ARGUMENT } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let verbose = cli.verbose > 0;

    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Score(a) => cmd_score(a, verbose).map(drop),
        Command::Stack(a) => cmd_stack(a, verbose).map(drop),
        Command::Benchmark(a) => cmd_benchmark(a, verbose).map(drop),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
