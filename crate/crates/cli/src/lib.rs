//! Batch driver: parse arguments and config, run suites, write certificates.

pub mod config;
pub mod output;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use scvlab_core::Certificate;

pub use config::{load_config, parse_config, ConfigFile};

/// Exit code when every certificate passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when some certificate fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for usage and config errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("config schema error at '{pointer}': {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid config value at '{pointer}': {message}")]
    Invalid { pointer: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SolveDbar,
    Cauchy,
    Psh,
    Hull,
    Operator,
    Hormander,
    Ot,
    Lp,
    Weights,
    All,
}

impl Command {
    /// Suites in declaration order, which is also the output order of `all`.
    pub const SUITES: [Command; 9] = [
        Command::SolveDbar,
        Command::Cauchy,
        Command::Psh,
        Command::Hull,
        Command::Operator,
        Command::Hormander,
        Command::Ot,
        Command::Lp,
        Command::Weights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveDbar => "solve-dbar",
            Command::Cauchy => "cauchy",
            Command::Psh => "psh",
            Command::Hull => "hull",
            Command::Operator => "operator",
            Command::Hormander => "hormander",
            Command::Ot => "ot",
            Command::Lp => "lp",
            Command::Weights => "weights",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scvlab", version, about = "Numerical certificates for several complex variables")]
pub struct Args {
    /// Suite to run.
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Nodes per axis of the one-variable grids (overrides the config).
    #[arg(long, value_name = "N")]
    pub res: Option<usize>,
}

/// Fully resolved run: command, config with overrides applied, output dir.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub config: ConfigFile,
    pub output: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_OUTPUT: &str = "scvlab-out";

#[derive(Debug)]
pub enum ArgsOutcome {
    Run(Box<RunConfig>),
    /// Help or version text was requested; print it and exit 0.
    Info(String),
    Usage(String),
}

/// Parse argv (including the program name) and load the config file.
pub fn parse_args<I, T>(argv: I) -> ArgsOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ArgsOutcome::Info(e.to_string())
                }
                _ => ArgsOutcome::Usage(e.to_string()),
            }
        }
    };
    match load_config(&args.config).and_then(|c| resolve(args, c)) {
        Ok(run) => ArgsOutcome::Run(Box::new(run)),
        Err(e) => ArgsOutcome::Usage(e.to_string()),
    }
}

fn resolve(args: Args, mut config: ConfigFile) -> Result<RunConfig, ConfigError> {
    if let Some(r) = args.res {
        config.resolution = Some(r);
    }
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    suites::validate(&config)?;
    let output = args.out.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let seed = config.seed.unwrap_or(0);
    Ok(RunConfig { command: args.command, config, output, seed })
}

/// Certificates of one command, in suite declaration order.
pub fn certificates_for(run: &RunConfig) -> (Vec<Certificate>, Vec<output::Csv>) {
    let commands: Vec<Command> = match run.command {
        Command::All => Command::SUITES.to_vec(),
        c => vec![c],
    };
    let mut certs = Vec::new();
    let mut csvs = Vec::new();
    for c in commands {
        let out = suites::run_suite(c, &run.config, run.seed);
        certs.extend(out.certificates);
        csvs.extend(out.csvs);
    }
    for cert in &mut certs {
        if let Some(&tol) = run.config.tolerances.get(&cert.check) {
            apply_tolerance(cert, tol);
        }
    }
    (certs, csvs)
}

/// Re-evaluate a certificate against an overridden tolerance.
pub fn apply_tolerance(cert: &mut Certificate, tolerance: f64) {
    cert.tolerance = tolerance;
    if cert.error.is_none() {
        cert.pass = !cert.margin.is_nan() && cert.margin >= -tolerance;
    }
}

/// Execute a resolved run; returns the exit code.
pub fn run(run: &RunConfig, stdout: &mut dyn Write) -> i32 {
    let (certs, csvs) = certificates_for(run);
    if let Err(e) = output::write_outputs(&run.output, &certs, &csvs) {
        let _ = writeln!(stdout, "FAIL output error: {e}");
        return EXIT_FAIL;
    }
    for c in &certs {
        let _ = writeln!(stdout, "{}", c.summary_line());
    }
    if certs.iter().all(|c| c.pass) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        ArgsOutcome::Run(r) => run(&r, stdout),
        ArgsOutcome::Info(text) => {
            let _ = write!(stdout, "{text}");
            EXIT_PASS
        }
        ArgsOutcome::Usage(text) => {
            let _ = writeln!(stderr, "{}", text.trim_end());
            EXIT_USAGE
        }
    }
}
