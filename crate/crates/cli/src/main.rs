//! `fidlab`: JSON in, JSON out. Results go to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 on success, 1 when a sweep, recovery or self-test fails,
//! 2 on unreadable input, invalid configuration or bad flags.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

#[derive(Parser)]
#[command(name = "fidlab", version, about = "Fidelity and channel checks on finite-dimensional tracial algebras")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file, which overrides the compiled defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Config JSON; falls back to $FIDLAB_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub psd_tol: Option<f64>,
    #[arg(long, global = true)]
    pub trace_tol: Option<f64>,
    #[arg(long, global = true)]
    pub opt_tol: Option<f64>,
    #[arg(long, global = true)]
    pub margin_tol: Option<f64>,
    #[arg(long, global = true)]
    pub classify_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    /// Read elements over CAR level k: one block of size 2^k with τ(1) = 1.
    #[arg(long, global = true, value_name = "K")]
    pub car_level: Option<usize>,
    /// Add runtimes to the JSON output (which then differs run to run).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity of two density elements by one or more routes.
    Fidelity {
        sigma: PathBuf,
        rho: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        routes: Vec<RouteArg>,
    },
    /// Bures distance of two density elements.
    Bures { sigma: PathBuf, rho: PathBuf },
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Seeded Monte Carlo sweeps.
    Sweep(SweepArgs),
    /// Predual-positivity and operator-matrix verdicts for a predual matrix.
    Order { omega: PathBuf },
    /// Fidelity of a pair at level --car-level and after successive embeddings.
    Car {
        sigma: Option<PathBuf>,
        rho: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Runs the acceptance suite, or the listed criteria.
    Selftest { criteria: Vec<u8> },
}

#[derive(Subcommand)]
enum ChannelCommand {
    /// Applies a Kraus channel to a density element.
    Apply { channel: PathBuf, state: PathBuf },
    /// Complete positivity, trace preservation, injectivity, and the Schwarz
    /// inequality for the unital dual.
    Certify {
        channel: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Reconstructs the implementing unitary of a fidelity-preserving channel.
    Recover {
        channel: PathBuf,
        #[arg(long, default_value_t = 48)]
        pairs: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteArg {
    All,
    Direct,
    Mu,
    Var1,
    Var2,
    Block,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Monotonicity,
    Metric,
    Preserve,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceArg {
    RandomCptp,
    RandomUnitalPositive,
    Unitary,
    Depolarizing,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairsArg {
    Mixed,
    FullRank,
    Orthogonal,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(value_enum)]
    pub kind: SweepKind,
    /// Matrix size; defaults to 2 unless a channel or CAR level fixes the algebra.
    #[arg(long)]
    pub d: Option<usize>,
    /// Trials, or sampled pairs for `preserve`.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "random-cptp")]
    pub source: SourceArg,
    /// Kraus channel JSON; required for `preserve`.
    #[arg(long, value_name = "PATH")]
    pub channel: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mixed")]
    pub pairs: PairsArg,
    /// Also write per-trial margins as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::Context::new(cli.global).and_then(|ctx| match cli.command {
        Command::Fidelity { sigma, rho, routes } => ctx.fidelity(&sigma, &rho, &routes),
        Command::Bures { sigma, rho } => ctx.bures(&sigma, &rho),
        Command::Channel(ChannelCommand::Apply { channel, state }) => ctx.channel_apply(&channel, &state),
        Command::Channel(ChannelCommand::Certify { channel, samples }) => ctx.channel_certify(&channel, samples),
        Command::Channel(ChannelCommand::Recover { channel, pairs }) => ctx.channel_recover(&channel, pairs),
        Command::Sweep(args) => ctx.sweep(&args),
        Command::Order { omega } => ctx.order(&omega),
        Command::Car { sigma, rho, depth } => ctx.car(sigma.as_deref(), rho.as_deref(), depth),
        Command::Selftest { criteria } => ctx.selftest(&criteria),
    });
    match result {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.json).expect("serialisable");
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(out.code)
        }
        Err(Failure { code, message }) => {
            eprintln!("fidlab: error: {message}");
            ExitCode::from(code)
        }
    }
}
