use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

/// Simulation and analysis of quantum-noise randomized stream ciphers.
#[derive(Debug, Parser)]
#[command(name = "qsc", version, about)]
struct Cli {
    /// JSON object of flag values (`{"M": 16, "alpha": 0.5}`); explicit
    /// flags win. May also carry `"command"`.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the labeled constellation as JSON.
    #[command(args_override_self = true)]
    Constellation(ConstellationArgs),
    /// Analytic security report for a scenario.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Monte Carlo run of Alice, Bob and Eve.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Exhaustive known-plaintext key search; survivor curve as CSV.
    #[command(args_override_self = true)]
    Kpa(KpaArgs),
}

#[derive(Debug, Args)]
struct LinkArgs {
    /// `y00` or `qndm`, optionally with `+osk`, `+osk-indep`, `+dsr`.
    #[arg(long, default_value = "y00")]
    scheme: String,
    /// Number of communication bases.
    #[arg(long = "M", default_value_t = 16)]
    m: u32,
    /// Coherent amplitude |α|.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// DSR strength |R_p| (arc length); required with `+dsr`.
    #[arg(long)]
    rp: Option<f64>,
}

#[derive(Debug, Args)]
struct ConstellationArgs {
    #[arg(long, default_value = "y00")]
    scheme: String,
    #[arg(long = "M", default_value_t = 16)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Y00,
    Qndm,
    Dsr,
    Locking,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum, default_value = "y00")]
    scenario: ScenarioArg,
    #[arg(long = "M", default_value_t = 16)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Key length |K| in bits (the first key for QNDM).
    #[arg(long, default_value_t = 256)]
    key_bits: u32,
    /// QNDM second key length; defaults to `--key-bits`.
    #[arg(long)]
    key_bits_2: Option<u32>,
    #[arg(long)]
    rp: Option<f64>,
    /// Message length for the locking scenario.
    #[arg(long, default_value_t = 1024)]
    n: u32,
    /// Masking factor Λ.
    #[arg(long, default_value_t = qsc_core::constellation::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlaintextArg {
    Random,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceFormat {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// Slot count; accepts `1e6`.
    #[arg(long, default_value = "100000")]
    slots: String,
    /// Master seed; drawn and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker cap.
    #[arg(long, env = "QSC_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    plaintext: PlaintextArg,
    /// LFSR key width.
    #[arg(long, default_value_t = 16)]
    key_bits: u32,
    /// LFSR initial state, decimal or `0x` hex.
    #[arg(long)]
    key_state: Option<String>,
    /// 256-bit counter-mode key as 64 hex digits; replaces the LFSR.
    #[arg(long, conflicts_with_all = ["key_bits", "key_state"])]
    counter_key: Option<String>,
    /// Switch receiver noise off.
    #[arg(long)]
    noiseless: bool,
    /// Per-slot trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Trace format; inferred from the extension (`.bin`) when omitted.
    #[arg(long, value_enum)]
    trace_format: Option<TraceFormat>,
    /// Refuse to run unless the quantum-noise masking condition holds.
    #[arg(long)]
    masking_check: bool,
    #[arg(long, default_value_t = qsc_core::constellation::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KpaArgs {
    #[command(flatten)]
    link: LinkArgs,
    #[arg(long, default_value_t = 16)]
    key_bits: u32,
    /// LFSR state used by the transmitter; decimal or `0x` hex.
    #[arg(long)]
    true_key: Option<String>,
    #[arg(long, default_value = "160")]
    slots: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "QSC_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    noiseless: bool,
    /// Shuffle the known plaintext before the search.
    #[arg(long)]
    permute_plaintext: bool,
    /// Likelihood scoring with this log-score margin instead of hard
    /// elimination.
    #[arg(long)]
    soft: Option<f64>,
    /// Acceptance arc in units of σ.
    #[arg(long, default_value_t = 3.0)]
    radius_sigmas: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Param(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Param(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Param(m) => write!(f, "parameter error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<qsc_core::Error> for CliError {
    fn from(e: qsc_core::Error) -> Self {
        match e {
            qsc_core::Error::Numerical(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Param(e.to_string()),
        }
    }
}

fn run() -> Result<(), CliError> {
    let argv = config::expand_argv(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match cli.command {
        Command::Constellation(a) => commands::constellation(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Kpa(a) => commands::kpa(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsc: {e}");
            ExitCode::from(e.code())
        }
    }
}
