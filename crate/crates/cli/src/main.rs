use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softqec_cli::experiment::{format_table, run_experiments, ExperimentFile, Overrides};
use softqec_cli::selftest::{selftest, SelftestOptions};
use softqec_cli::CliError;

#[derive(Parser)]
#[command(name = "softqec", version, about = "Pulse-level simulation of five-qubit-code error correction on an Ising star")]
struct Cli {
    /// Worker threads for realizations (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a TOML file.
    Run {
        file: PathBuf,
        /// Replace every experiment's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Run only the named experiment(s).
        #[arg(long = "only")]
        only: Vec<String>,
    },
    /// Fast invariant checks.
    Selftest {
        /// Audit this shape table instead of freshly calibrated shapes.
        #[arg(long)]
        shapes: Option<PathBuf>,
        /// Comma-separated stabilizer generators.
        #[arg(long, value_delimiter = ',')]
        generators: Option<Vec<String>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { file, seed, out, only } => {
            let f = ExperimentFile::load(&file)?;
            let reports = run_experiments(&f, &Overrides { seed, out: Some(out), only })?;
            print!("{}", format_table(&reports));
            Ok(())
        }
        Command::Selftest { shapes, generators } => {
            let checks = selftest(&SelftestOptions { shapes, generators })?;
            for c in &checks {
                println!("{} {:<20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(CliError::SelftestFailed(n)),
            }
        }
    }
}
