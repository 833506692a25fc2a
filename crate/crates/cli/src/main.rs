use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmwave_mfg_cli::{run, Command, Options};

const THREADS_VAR: &str = "MMWAVE_MFG_THREADS";

#[derive(Parser)]
#[command(name = "mmwave-mfg", version, about = "Mean-field uplink power control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the mean-field equilibrium and the baseline.
    Solve(Args),
    /// Run the Monte Carlo oracle suite against the analytic laws.
    Validate {
        #[command(flatten)]
        args: Args,
        /// Network samples per check (interference checks use a tenth).
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Dump distance, association and interference-kernel tables.
    Tables(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scenario override, `key=value` or `section.key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn set_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let (cmd, args, samples) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a, 0),
        Cmd::Validate { args, samples } => (Command::Validate, args, samples),
        Cmd::Tables(a) => (Command::Tables, a, 0),
    };
    let opts = Options {
        config: args.config,
        out: args.out,
        seed: args.seed,
        overrides: args.overrides,
        samples,
    };
    match run(cmd, &opts, &mut |m| eprintln!("{m}")) {
        Ok(report) => {
            for p in &report.written {
                eprintln!("wrote {}", p.display());
            }
            if report.failed_checks.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: failed checks: {}", report.failed_checks.join(", "));
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
