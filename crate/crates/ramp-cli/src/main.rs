use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ramp_cli::commands::reproduce::{run_reproduce, ReproduceArgs};
use ramp_cli::commands::{run_amp, run_de, run_phase, run_potential};
use ramp_cli::commands::{AmpArgs, DeArgs, PhaseArgs, PotentialArgs};
use ramp_cli::config::Settings;
use ramp_cli::CliError;

/// Sparse-signal reconstruction under matrix uncertainty: solver runs,
/// achievability scans, density evolution and phase diagrams.
#[derive(Parser, Debug)]
#[command(name = "ramp", version, about, max_term_width = 100)]
struct Cli {
    /// Key-value config file (`key = value` lines, `#` comments); flags
    /// override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: RAMP_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate (or load) an instance and run the solver.
    Amp(AmpArgs),
    /// Scan the achievability potential over candidate MSE values.
    Potential(PotentialArgs),
    /// Run the density-evolution recursion to its fixed point.
    De(DeArgs),
    /// Classify a parameter grid and refine the transition lines.
    Phase(PhaseArgs),
    /// Regenerate the data behind the standard figures.
    Reproduce(ReproduceArgs),
}

fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var("RAMP_THREADS").ok().and_then(|v| v.parse().ok());
    if let Some(k) = flag.or(from_env) {
        // a later init attempt after the pool exists is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads(cli.threads);
    let mut settings = Settings::from_file(cli.config.as_deref())?;
    match &cli.command {
        Command::Amp(args) => run_amp(args, &mut settings),
        Command::Potential(args) => run_potential(args, &mut settings),
        Command::De(args) => run_de(args, &mut settings),
        Command::Phase(args) => run_phase(args, &mut settings),
        Command::Reproduce(args) => run_reproduce(args, &mut settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep help/version on stdout with status 0; everything else
            // is a usage error (exit code 2)
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ramp: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
