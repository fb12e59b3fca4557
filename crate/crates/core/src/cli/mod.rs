//! Command-line front end. Exit codes: 0 success, 1 user error, 2 internal
//! fault.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::harness::{ReportFormat, SweepAxis, DEFAULT_HARD_FRACTION, DEFAULT_RADIUS_FRACTION};
use crate::metrics::{ThresholdMode, DEFAULT_GAMMA};
use crate::slavc::{LossKind, DEFAULT_PRIOR_WEIGHT, DEFAULT_TAU};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_FAULT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "slavc",
    version,
    about = "Audio-visual source localization: losses, metrics and benchmark tools",
    args_override_self = true,
    after_help = "Every subcommand also accepts --config FILE: a TOML table whose keys are \
                  that subcommand's flag names. Flags given on the command line win."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score prediction maps against annotations and emit a report.
    Eval(EvalArgs),
    /// Emit a metric curve along one axis as CSV.
    Sweep(SweepArgs),
    /// Append automated negatives to an annotation file.
    GenNegatives(GenNegativesArgs),
    /// Train the toy encoders on the planted-source task.
    TrainToy(TrainToyArgs),
    /// Finite-difference check of a loss's analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Write center-prior maps for every annotated sample.
    BaselineCenter(BaselineCenterArgs),
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Annotation file, one JSON record per line.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory holding `<id>.vslm` prediction maps.
    #[arg(long)]
    pub maps: PathBuf,
    /// IoU above which a positive counts as localized.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// absolute:A, top-fraction:P or half-range.
    #[arg(long, default_value_t = ThresholdMode::default())]
    pub threshold_mode: ThresholdMode,
    /// Directory of object-prior maps blended into each prediction.
    #[arg(long)]
    pub ogl_dir: Option<PathBuf>,
    /// Weight of the audio-visual map in the object-prior blend.
    #[arg(long, default_value_t = DEFAULT_PRIOR_WEIGHT)]
    pub ogl_weight: f64,
    /// Seed of the positive subsets paired with each negative type.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Temperature the maps were produced with, echoed into the report.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// json, csv or table.
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// delta, gamma or top-fraction.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Number of evenly spaced points along the axis.
    #[arg(long, default_value_t = 9)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct GenNegativesArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Number of negatives to add, or `balance` to match the positives.
    #[arg(long)]
    pub count: String,
    #[arg(long, default_value_t = DEFAULT_HARD_FRACTION)]
    pub hard_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(long, default_value = "full")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 0.9)]
    pub vdrop: f64,
    #[arg(long, default_value_t = 0.0)]
    pub adrop: f64,
    #[arg(long, default_value_t = 0.999)]
    pub momentum: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch trace, one JSON record per line.
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "full")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scales the analytic gradient by 1.5; the check must then fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct BaselineCenterArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Profile width as a fraction of half the shorter frame side.
    #[arg(long, default_value_t = DEFAULT_RADIUS_FRACTION)]
    pub radius: f64,
}

/// Result of a subcommand that did not fail outright.
pub(crate) enum Outcome {
    Ok,
    /// Ran to completion but a verification failed.
    Failed,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_FAULT
            },
            message: e.to_string(),
        }
    }
}

/// Splices the keys of a `--config FILE` TOML table in as flags right after
/// the subcommand name, so explicit flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let user = |message: String| Failure {
        code: EXIT_USER,
        message,
    };
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it
                .next()
                .ok_or_else(|| user("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text =
        std::fs::read_to_string(&path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = OsString::from(format!("--{key}"));
        match value {
            toml::Value::Boolean(true) => flags.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => flags.extend([flag, s.into()]),
            toml::Value::Integer(i) => flags.extend([flag, i.to_string().into()]),
            toml::Value::Float(f) => flags.extend([flag, f.to_string().into()]),
            other => {
                return Err(user(format!(
                    "{}: key `{key}` must be a string, number or boolean, got {}",
                    path.display(),
                    other.type_str()
                )))
            }
        }
    }
    // The subcommand is the first argument after the program name that is
    // not an option.
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| user("--config given without a subcommand".into()))?;
    rest.splice(at..at, flags);
    Ok(rest)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Failed) => EXIT_FAULT,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
