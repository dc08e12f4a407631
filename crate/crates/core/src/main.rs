use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randboot::cli::{self, CliError, Overrides, RunConfig, THREADS_ENV};
use randboot::selftest::Fault;

/// Bootstrap validity experiments.
#[derive(Parser)]
#[command(name = "randboot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unconditional replications: pvalues.csv and report.json.
    Run(ConfigArgs),
    /// Double design: panel.csv, fanchart.csv and report.json.
    Fanchart(ConfigArgs),
    /// Local-power sweep against the asymptotic oracle: power.csv.
    Power(ConfigArgs),
    /// Fast invariant suite.
    Selftest {
        /// Deliberately break a component (cyclic-permutations).
        #[arg(long)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides RANDBOOT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            master_seed: self.seed,
            output_dir: self.output_dir.clone(),
            threads: self.threads,
            grid_size: self.grid_size,
        };
        let env = std::env::var(THREADS_ENV).ok();
        RunConfig::load(&self.config, &overrides, env.as_deref())
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match &args.command {
        Command::Run(a) => a.load().and_then(|c| cli::cmd_run(&c)),
        Command::Fanchart(a) => a.load().and_then(|c| cli::cmd_fanchart(&c)),
        Command::Power(a) => a.load().and_then(|c| cli::cmd_power(&c)),
        Command::Selftest { inject_fault } => {
            let (ok, table) = cli::cmd_selftest(*inject_fault);
            print!("{table}");
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("randboot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
