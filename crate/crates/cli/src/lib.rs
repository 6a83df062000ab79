//! Command-line front end for the `async-sparse` engines.
//!
//! Subcommands: `gen-events`, `gen-model`, `run`, `compare`, `flops`, `fractal`.
//! Reports are CSV unless `--json` is given; reals are printed with 9
//! significant digits.

mod commands;
mod frames;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use async_sparse::analysis::Mode;
use async_sparse::ReprKind;

/// Environment variable seeding `random:<template>` models.
pub const SEED_ENV: &str = "ASYNC_SPARSE_SEED";

#[derive(Parser, Debug)]
#[command(name = "async-sparse", version, about = "Dense, sparse and asynchronous event-camera inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize events from a frame sequence with the ideal sensor model.
    GenEvents(GenEventsArgs),
    /// Write a model file for an architecture template with random weights.
    GenModel(GenModelArgs),
    /// Run one engine over an event stream, reporting outputs per step.
    Run(RunArgs),
    /// Run all three engines and report per-layer deviations and FLOPs.
    Compare(CompareArgs),
    /// Per-layer FLOP ledger.
    Flops(FlopsArgs),
    /// Fractal dimension of the active sites of a representation.
    Fractal(FractalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReprArg {
    Histogram,
    Queue,
}

impl From<ReprArg> for ReprKind {
    fn from(r: ReprArg) -> Self {
        match r {
            ReprArg::Histogram => ReprKind::Histogram,
            ReprArg::Queue => ReprKind::Queue,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Dense,
    Sparse,
    Async,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dense => Mode::Dense,
            ModeArg::Sparse => Mode::Sparse,
            ModeArg::Async => Mode::Async,
        }
    }
}

#[derive(Args, Debug)]
struct GenEventsArgs {
    /// Directory of PNG/PGM/PPM frames, or `synthetic:<ramp|disk|bar>`.
    #[arg(long)]
    frames: String,
    /// Contrast threshold on log intensity.
    #[arg(long)]
    threshold: f64,
    /// Sensor width for synthetic sequences.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Sensor height for synthetic sequences.
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Frame count for synthetic sequences.
    #[arg(long, default_value_t = 30)]
    num_frames: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct GenModelArgs {
    /// Template name (`vgg13`, `small`).
    #[arg(long)]
    template: String,
    #[arg(long, default_value_t = 240)]
    width: usize,
    #[arg(long, default_value_t = 180)]
    height: usize,
    #[arg(long, value_enum, default_value_t = ReprArg::Histogram)]
    repr: ReprArg,
    #[arg(long)]
    window: Option<usize>,
    /// Weight seed; defaults to $ASYNC_SPARSE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

/// Options shared by commands that stream events through a model.
#[derive(Args, Debug)]
struct StreamArgs {
    /// Model file, or `random:<template>` seeded by $ASYNC_SPARSE_SEED.
    #[arg(long)]
    model: String,
    #[arg(long)]
    events: PathBuf,
    /// Representation; defaults to the model's.
    #[arg(long, value_enum)]
    repr: Option<ReprArg>,
    /// Sliding window in events; defaults to the model's (25000 for templates).
    #[arg(long)]
    window: Option<usize>,
    /// Events per update step.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Only process the first N events.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Async)]
    mode: ModeArg,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct FlopsArgs {
    /// Model file, or `random:<template>`.
    #[arg(long)]
    model: String,
    /// Accumulate measured counts over this stream; without it only the
    /// closed-form dense ledger is available.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Dense)]
    mode: ModeArg,
    #[arg(long, value_enum)]
    repr: Option<ReprArg>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long)]
    limit: Option<usize>,
    /// Sensor width for templates when no events are given.
    #[arg(long, default_value_t = 240)]
    width: usize,
    /// Sensor height for templates when no events are given.
    #[arg(long, default_value_t = 180)]
    height: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct FractalArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, value_enum, default_value_t = ReprArg::Histogram)]
    repr: ReprArg,
    /// Comma-separated radii; defaults to 1,2,3,4,6,8,12,16 clipped to the sensor.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<usize>>,
    /// Use the last W events (all when omitted).
    #[arg(long)]
    window: Option<usize>,
    /// Single box centre `x,y`; otherwise counts are averaged over every active site.
    #[arg(long)]
    center: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Failures print a one-line diagnostic to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return 2;
        }
    };
    let result = match cli.command {
        Command::GenEvents(a) => commands::gen_events(a),
        Command::GenModel(a) => commands::gen_model(a),
        Command::Run(a) => commands::run(a),
        Command::Compare(a) => commands::compare(a),
        Command::Flops(a) => commands::flops(a),
        Command::Fractal(a) => commands::fractal(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            1
        }
    }
}
