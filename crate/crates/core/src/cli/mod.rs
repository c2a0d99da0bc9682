//! Command-line front end: configuration files, built-in examples and experiment commands.

mod check;
mod commands;
pub mod config;
pub mod registry;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::error::Error;
pub use config::{load_config, load_str, BuiltSystem, SystemConfig, SystemKind, TransitionSpec, Value};

#[derive(Parser, Debug)]
#[command(
    name = "nonsmooth",
    version,
    about = "Experiments on piecewise-smooth and non-smooth slow-fast systems"
)]
struct Cli {
    /// Write outputs atomically into this directory, with a JSON summary
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SystemArg {
    /// Example name (see `examples list`) or path to a configuration file
    system: String,
}

#[derive(Args, Debug, Clone, Default)]
struct RangeArgs {
    /// Sampled segment, e.g. `x2=-1:2`
    #[arg(long)]
    range: Option<String>,
    /// Number of samples
    #[arg(long)]
    n: Option<usize>,
    /// Values of the coordinates not varied, e.g. `0,0.5`
    #[arg(long, allow_hyphen_values = true)]
    base: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct SliceArgs {
    /// Fast variable y held fixed (nsff, ccomb)
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    /// Value of eps held fixed (nsff, ccomb)
    #[arg(long = "eps", allow_hyphen_values = true)]
    eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify points of the switching manifold
    Classify {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Sliding vector field along a segment of the switching manifold
    Slide {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Regularized vector field along a segment
    Regularize {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        slice: SliceArgs,
        /// Width of the regularization band
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Critical manifold of the blown-up regularization and r-classification
    Blowup {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Integrate the Filippov flow, or the regularized flow with --delta
    Integrate {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        slice: SliceArgs,
        /// Initial point, e.g. `-0.5,0.2`
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t1: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
    },
    /// Stability of a sliding equilibrium
    Equilibria {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        slice: SliceArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
    },
    /// Equilibria of the regularized field for a grid of delta
    SweepDelta {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        slice: SliceArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Comma list or `start:stop:count`
        #[arg(long)]
        deltas: Option<String>,
    },
    /// Equilibria of the slow-fast sliding field for a grid of eps
    SweepEps {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Comma list or `start:stop:count`
        #[arg(long)]
        eps: Option<String>,
        /// Starting lambda branch id (ccomb)
        #[arg(long)]
        branch: Option<usize>,
        /// Starting lambda value (ccomb)
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
    },
    /// Lambda branches and c-sliding vector fields
    Csliding {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// Run the invariant checks against a system
    Check {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Built-in example systems
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand, Debug)]
enum ExamplesAction {
    /// Names and one-line descriptions
    List,
    /// Configuration text of an example
    Show { name: String },
}

impl Command {
    fn verb(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Slide { .. } => "slide",
            Command::Regularize { .. } => "regularize",
            Command::Blowup { .. } => "blowup",
            Command::Integrate { .. } => "integrate",
            Command::Equilibria { .. } => "equilibria",
            Command::SweepDelta { .. } => "sweep-delta",
            Command::SweepEps { .. } => "sweep-eps",
            Command::Csliding { .. } => "csliding",
            Command::Check { .. } => "check",
            Command::Examples { .. } => "examples",
        }
    }
}

/// A named output, CSV unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<OutputFile>,
}

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub(crate) struct Outcome {
    pub files: Vec<OutputFile>,
    pub pass: usize,
    pub fail: usize,
    pub config_text: Option<String>,
}

/// Runs one command in-process. `args[0]` is the program name.
pub fn run<I, T>(args: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return RunOutput {
                code,
                stdout: if code == 0 { text.clone() } else { String::new() },
                stderr: if code == 0 { String::new() } else { text },
                files: vec![],
            };
        }
    };
    let start = Instant::now();
    let verb = cli.command.verb();
    let result = commands::execute(&cli.command, cli.seed);
    let out = match result {
        Ok(o) => o,
        Err(CliError::Usage(m)) => return failure(2, format!("error: {m}\n")),
        Err(CliError::Domain(e)) => return failure(1, format!("error: {e}\n")),
    };
    let code = if out.fail > 0 { 1 } else { 0 };
    let mut stdout = String::new();
    match &cli.out {
        Some(dir) => {
            let summary = summary_json(verb, &out, start.elapsed().as_secs_f64());
            let mut all = out.files.clone();
            all.push(OutputFile {
                name: "summary.json".into(),
                content: summary,
            });
            for f in &all {
                if let Err(e) = write_atomic(dir, &f.name, &f.content) {
                    return failure(1, format!("error: {e}\n"));
                }
                stdout.push_str(&format!("{}\n", dir.join(&f.name).display()));
            }
        }
        None => {
            let many = out.files.len() > 1;
            for f in &out.files {
                if many {
                    stdout.push_str(&format!("# {}\n", f.name));
                }
                stdout.push_str(&f.content);
            }
        }
    }
    RunOutput {
        code,
        stdout,
        stderr: String::new(),
        files: out.files,
    }
}

fn failure(code: i32, stderr: String) -> RunOutput {
    RunOutput {
        code,
        stdout: String::new(),
        stderr,
        files: vec![],
    }
}

fn summary_json(verb: &str, out: &Outcome, wall: f64) -> String {
    let hash = out
        .config_text
        .as_ref()
        .map(|t| hex::encode(Sha256::digest(t.as_bytes())));
    let v = serde_json::json!({
        "command": verb,
        "config_hash": hash,
        "wall_time_s": wall,
        "outputs": out.files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
        "pass": out.pass,
        "fail": out.fail,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("json value");
    s.push('\n');
    s
}

fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<(), Error> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Entry point of the `nonsmooth` binary.
pub fn main_entry() -> i32 {
    use std::io::Write;
    let out = run(std::env::args_os());
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    out.code
}
