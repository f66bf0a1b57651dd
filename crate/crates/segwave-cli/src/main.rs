//! `segwave` command line: segment signals by RMS changepoints, generate
//! synthetic benchmarks, select the Laplace scale, and export spectrogram
//! matrices.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use segwave::energy::Signal;
use segwave::error::SegError;
use segwave::evalue::Prior;
use segwave::mcmc::McmcConfig;
use segwave::segmenter::{segment, SegConfig, SegmentationResult, Significance};
use segwave::simlab::{run_benchmark, select_beta, simulate, Algorithm, EvalRecord, SimSpec};
use segwave::spectrogram::spectrogram;
use segwave::textio::{parse_csv_signal, parse_grid_spec, parse_raw_f64, write_raw_f64};
use segwave::wav::{digest_bytes, load_wav};
use segwave::{preprocess, zero_mean_signal};

#[derive(Parser)]
#[command(name = "segwave", version, about = "RMS changepoint segmentation of 1-D signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a signal and write changepoints with their evidence.
    Segment(SegmentArgs),
    /// Generate a synthetic variance-changepoint signal.
    Simulate(SimulateArgs),
    /// Run the detection benchmark over synthetic signals.
    Bench(BenchArgs),
    /// Scan the Laplace scale and pick the BIC-curve knee.
    SelectBeta(SelectBetaArgs),
    /// Export a Hann-window spectrogram matrix.
    Spectrogram(SpectrogramArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Wav,
    Raw,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriorKind {
    Jeffreys,
    Laplace,
}

#[derive(Args)]
struct InputArgs {
    /// Input file: RIFF/WAVE, raw little-endian float64, or single-column CSV.
    #[arg(long)]
    input: PathBuf,
    /// Override the extension-based format detection.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Channel to analyze (WAV input only).
    #[arg(long)]
    channel: Option<usize>,
    /// Integer decimation factor (moving-average anti-alias, keep every D-th).
    #[arg(long)]
    decimate: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    prior: PriorKind,
    /// Laplace scale on the log variance ratio (required with --prior laplace).
    #[arg(long)]
    beta: Option<f64>,
    /// Per-test significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Candidate-grid step at the top level.
    #[arg(long, default_value_t = 1000)]
    resolution: usize,
    /// Minimum segment length in samples.
    #[arg(long = "min-seg", default_value_t = 1000)]
    min_seg: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after accepting this many changepoints.
    #[arg(long = "max-changepoints")]
    max_changepoints: Option<usize>,
    /// JSON output path.
    #[arg(long)]
    output: PathBuf,
    /// Optional CSV of the accepted changepoints.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock timestamps in the manifest (makes reruns differ).
    #[arg(long)]
    timestamps: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    /// Expected changepoint count.
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raw float64 output path.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth JSON path.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated signal lengths, e.g. 10000,50000,100000.
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    /// Comma-separated algorithms: bayes-jeffreys,bayes-laplace,pelt,binseg.
    #[arg(long)]
    algorithms: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    output: PathBuf,
    /// Optional JSON output path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Report zero in the time column so reruns are byte-identical.
    #[arg(long = "no-timing")]
    no_timing: bool,
}

#[derive(Args)]
struct SelectBetaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Grid specification, e.g. 1e-6:1e-1:log9.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    resolution: usize,
    #[arg(long = "min-seg", default_value_t = 1000)]
    min_seg: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path for the BIC curve.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1024)]
    window: usize,
    #[arg(long, default_value_t = 512)]
    hop: usize,
    /// CSV matrix output path.
    #[arg(long)]
    output: PathBuf,
    /// Optional binary PGM quick-look image.
    #[arg(long)]
    png: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Input(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

// Failures while computing on already-validated input are internal.
fn internal(e: SegError) -> CliError {
    CliError::Internal(e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SEGWAVE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("segwave: ignoring invalid SEGWAVE_THREADS='{threads}'");
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let kind = e.kind();
            if kind == ClapErrorKind::DisplayHelp || kind == ClapErrorKind::DisplayVersion {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Segment(args) => cmd_segment(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::SelectBeta(args) => cmd_select_beta(args),
        Command::Spectrogram(args) => cmd_spectrogram(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("segwave: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

fn detect_format(path: &Path, requested: Option<InputFormat>) -> Result<InputFormat, CliError> {
    if let Some(format) = requested {
        return Ok(format);
    }
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("wav" | "wave") => Ok(InputFormat::Wav),
        Some("raw" | "bin" | "f64") => Ok(InputFormat::Raw),
        Some("csv" | "txt") => Ok(InputFormat::Csv),
        other => Err(CliError::Usage(format!(
            "cannot infer input format from extension {:?}; pass --format",
            other.unwrap_or("")
        ))),
    }
}

struct LoadedSignal {
    signal: Signal,
    digest: String,
}

fn load_signal(args: &InputArgs) -> Result<LoadedSignal, CliError> {
    let format = detect_format(&args.input, args.format)?;
    if args.channel.is_some() && format != InputFormat::Wav {
        return Err(CliError::Usage(
            "--channel applies only to WAV input".into(),
        ));
    }
    match format {
        InputFormat::Wav => {
            let clip = load_wav(&args.input)
                .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
            let channel = args.channel.unwrap_or(0);
            if clip.channels.len() > 1 && args.channel.is_none() {
                eprintln!(
                    "segwave: input has {} channels, defaulting to channel 0",
                    clip.channels.len()
                );
            }
            let digest = clip.source_digest.clone();
            let signal = preprocess(&clip, channel, args.decimate)
                .map_err(|e| CliError::Input(e.to_string()))?;
            Ok(LoadedSignal { signal, digest })
        }
        InputFormat::Raw | InputFormat::Csv => {
            let bytes = std::fs::read(&args.input)
                .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
            let samples = match format {
                InputFormat::Raw => parse_raw_f64(&bytes),
                _ => parse_csv_signal(&bytes),
            }
            .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
            let digest = digest_bytes(&bytes);
            let signal = zero_mean_signal(samples, None, args.decimate)
                .map_err(|e| CliError::Input(e.to_string()))?;
            Ok(LoadedSignal { signal, digest })
        }
    }
}

fn now_rfc3339() -> String {
    // Zulu timestamp with whole-second resolution; informational only.
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = secs / 86_400;
    let tod = secs % 86_400;
    // Civil-date conversion (days since 1970-01-01).
    let mut year = 1970i64;
    let mut remaining = days as i64;
    loop {
        let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        let len = if leap { 366 } else { 365 };
        if remaining < len {
            break;
        }
        remaining -= len;
        year += 1;
    }
    let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    let month_lengths = [
        31,
        if leap { 29 } else { 28 },
        31,
        30,
        31,
        30,
        31,
        31,
        30,
        31,
        30,
        31,
    ];
    let mut month = 0usize;
    while remaining >= month_lengths[month] {
        remaining -= month_lengths[month];
        month += 1;
    }
    format!(
        "{year:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        month + 1,
        remaining + 1,
        tod / 3600,
        (tod % 3600) / 60,
        tod % 60
    )
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ChangepointRecord {
    index: usize,
    time_s: Option<f64>,
    ev: f64,
    sev: f64,
}

#[derive(Serialize)]
struct SegmentOutput<'a> {
    manifest: &'a segwave::RunManifest,
    n: usize,
    sample_rate: Option<f64>,
    changepoints: Vec<ChangepointRecord>,
    segments: &'a [segwave::SegmentStats],
}

fn cmd_segment(args: SegmentArgs) -> Result<(), CliError> {
    let prior = match (args.prior, args.beta) {
        (PriorKind::Jeffreys, None) => Prior::Jeffreys,
        (PriorKind::Jeffreys, Some(_)) => {
            return Err(CliError::Usage(
                "--beta applies only to --prior laplace".into(),
            ))
        }
        (PriorKind::Laplace, Some(beta)) => {
            Prior::laplace(beta).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (PriorKind::Laplace, None) => {
            return Err(CliError::Usage(
                "--prior laplace requires --beta".into(),
            ))
        }
    };
    let config = SegConfig {
        alpha: args.alpha,
        prior,
        base_resolution: args.resolution,
        min_seg_len: args.min_seg,
        max_changepoints: args.max_changepoints,
        mcmc: McmcConfig::default(),
        seed: args.seed,
        significance: Significance::ChiSquare,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let started_at = args.timestamps.then(now_rfc3339);
    let loaded = load_signal(&args.input)?;
    let mut result: SegmentationResult =
        segment(&loaded.signal, &config).map_err(internal)?;
    result.manifest.source_digest = Some(loaded.digest);
    result.manifest.started_at = started_at;
    result.manifest.finished_at = args.timestamps.then(now_rfc3339);

    let rate = loaded.signal.sample_rate_hz();
    let changepoints: Vec<ChangepointRecord> = result
        .changepoints
        .iter()
        .zip(&result.reports)
        .map(|(&index, report)| ChangepointRecord {
            index,
            time_s: rate.map(|r| index as f64 / r),
            ev: report.ev,
            sev: report.sev,
        })
        .collect();
    let output = SegmentOutput {
        manifest: &result.manifest,
        n: loaded.signal.len(),
        sample_rate: rate,
        changepoints,
        segments: &result.segments,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.output, json.as_bytes())?;

    if let Some(csv_path) = &args.csv {
        let mut csv = String::from("index,time_s,ev,sev\n");
        for record in &output.changepoints {
            let time = record
                .time_s
                .map(|t| t.to_string())
                .unwrap_or_default();
            let _ = writeln!(csv, "{},{},{},{}", record.index, time, record.ev, record.sev);
        }
        write_file(csv_path, csv.as_bytes())?;
    }
    eprintln!(
        "segwave: {} changepoints accepted, {} rejected candidates",
        result.changepoints.len(),
        result.rejected_candidates.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TruthOutput {
    n: usize,
    expected_k: usize,
    var_low: f64,
    var_high: f64,
    seed: u64,
    changepoints: Vec<usize>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = SimSpec {
        n: args.n,
        expected_k: args.k,
        seed: args.seed,
        replicates: 1,
        ..SimSpec::default()
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (signal, changepoints) = simulate(&spec).map_err(internal)?;

    let mut bytes = Vec::with_capacity(signal.len() * 8);
    write_raw_f64(&mut bytes, signal.samples())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.output, &bytes)?;

    let truth = TruthOutput {
        n: spec.n,
        expected_k: spec.expected_k,
        var_low: spec.var_low,
        var_high: spec.var_high,
        seed: spec.seed,
        changepoints,
    };
    let json = serde_json::to_string_pretty(&truth)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.truth, json.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn records_to_csv(records: &[EvalRecord], no_timing: bool) -> String {
    let mut csv = String::from(
        "n,algorithm,time_s,true_k,est_k,precision,recall,f1_standard,f1_paper,failed_replicates\n",
    );
    for r in records {
        let time = if no_timing { 0.0 } else { r.time_s };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.algorithm,
            time,
            r.true_k,
            r.est_k,
            r.precision,
            r.recall,
            r.f1_standard,
            r.f1_paper,
            r.failed_replicates
        );
    }
    csv
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("bad size '{s}': {e}")))
        })
        .collect::<Result<_, _>>()?;
    let algorithms: Vec<Algorithm> = args
        .algorithms
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<Algorithm>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let specs: Vec<SimSpec> = sizes
        .iter()
        .map(|&n| SimSpec {
            n,
            replicates: args.replicates,
            seed: args.seed,
            ..SimSpec::default()
        })
        .collect();
    for spec in &specs {
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let records = run_benchmark(&specs, &algorithms).map_err(internal)?;
    write_file(&args.output, records_to_csv(&records, args.no_timing).as_bytes())?;
    if let Some(json_path) = &args.json {
        let mut sanitized = records.clone();
        if args.no_timing {
            for r in sanitized.iter_mut() {
                r.time_s = 0.0;
            }
        }
        let json = serde_json::to_string_pretty(&sanitized)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(json_path, json.as_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// select-beta
// ---------------------------------------------------------------------------

fn cmd_select_beta(args: SelectBetaArgs) -> Result<(), CliError> {
    let grid = parse_grid_spec(&args.grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = SegConfig {
        alpha: args.alpha,
        prior: Prior::Jeffreys, // replaced per grid point
        base_resolution: args.resolution,
        min_seg_len: args.min_seg,
        max_changepoints: None,
        mcmc: McmcConfig::default(),
        seed: args.seed,
        significance: Significance::ChiSquare,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let loaded = load_signal(&args.input)?;
    let selection = select_beta(&loaded.signal, &grid, &config).map_err(internal)?;

    let mut csv = String::from("beta,bic,changepoints,selected\n");
    for point in &selection.curve {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            point.beta,
            point.bic,
            point.changepoints,
            (point.beta == selection.beta_star) as u8
        );
    }
    write_file(&args.output, csv.as_bytes())?;

    let summary = serde_json::json!({
        "beta_star": selection.beta_star,
        "fallback": selection.fallback,
    });
    println!("{summary}");
    if selection.fallback {
        eprintln!("segwave: BIC curve has no knee; reported the smallest beta");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// spectrogram
// ---------------------------------------------------------------------------

fn cmd_spectrogram(args: SpectrogramArgs) -> Result<(), CliError> {
    let loaded = load_signal(&args.input)?;
    let spec = spectrogram(&loaded.signal, args.window, args.hop)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut csv = String::from("freq\\time");
    for t in &spec.time_axis {
        let _ = write!(csv, ",{t}");
    }
    csv.push('\n');
    for (bin, row) in spec.db.iter().enumerate() {
        let _ = write!(csv, "{}", spec.freq_axis[bin]);
        for v in row {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    write_file(&args.output, csv.as_bytes())?;

    if let Some(pgm_path) = &args.png {
        write_file(pgm_path, &render_pgm(&spec.db))?;
    }
    Ok(())
}

// Binary PGM quick-look: rows top-down from the highest frequency, dB
// mapped over an 80 dB range below the peak.
fn render_pgm(db: &[Vec<f64>]) -> Vec<u8> {
    let bins = db.len();
    let frames = db.first().map_or(0, Vec::len);
    let peak = db
        .iter()
        .flat_map(|row| row.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = peak - 80.0;
    let mut out = Vec::with_capacity(32 + bins * frames);
    let _ = write!(out, "P5\n{frames} {bins}\n255\n");
    for bin in (0..bins).rev() {
        for frame in 0..frames {
            let v = ((db[bin][frame] - floor) / 80.0).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}
