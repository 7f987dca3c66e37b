use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invnet_cli::{
    load_config, run_simulate, run_solve, run_verify, CliError, Method, Report, SimulateArgs,
    VerifyArgs,
};

/// Stationary analysis of production-inventory networks with a shared supplier.
#[derive(Parser)]
#[command(name = "invnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the inventory distribution theta and the queue marginals.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[command(flatten)]
        output: Output,
    },
    /// Run every applicable solver and structural check; exit 0 iff all pass.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long)]
        no_simulation: bool,
        #[arg(long, default_value_t = 0.02)]
        theta_tol: f64,
        #[arg(long, default_value_t = 0.02)]
        queue_tol: f64,
        #[arg(long, default_value_t = 0.03)]
        decoupling_tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate the joint process and compare with the analytic solution.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct SimFlags {
    /// Events per replication.
    #[arg(long, default_value_t = 1_000_000)]
    events: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent replications, run in parallel with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Queue lengths are recorded up to this level; longer queues share the last bin.
    #[arg(long, default_value_t = 6)]
    n_obs: usize,
}

impl From<SimFlags> for SimulateArgs {
    fn from(f: SimFlags) -> Self {
        SimulateArgs {
            events: f.events,
            seed: f.seed,
            replications: f.replications,
            n_obs: f.n_obs,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the theta table as CSV, plus `.marginals.csv` and `.checks.csv` beside it.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn emit(report: &Report, output: &Output) -> Result<(), CliError> {
    print!("{}", report.to_text());
    if let Some(path) = &output.json {
        let json = report.to_json()?;
        std::fs::write(path, json)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &output.csv {
        report.write_csv(path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (report, output) = match cli.command {
        Command::Solve {
            config,
            method,
            output,
        } => (run_solve(&load_config(&config)?, method)?, output),
        Command::Verify {
            config,
            sim,
            no_simulation,
            theta_tol,
            queue_tol,
            decoupling_tol,
            output,
        } => {
            let args = VerifyArgs {
                simulation: (!no_simulation).then(|| sim.into()),
                theta_tol,
                queue_tol,
                decoupling_tol,
            };
            (run_verify(&load_config(&config)?, &args)?, output)
        }
        Command::Simulate {
            config,
            sim,
            output,
        } => (run_simulate(&load_config(&config)?, &sim.into())?, output),
    };
    emit(&report, &output)?;
    let failures: Vec<_> = report.failures().collect();
    if !failures.is_empty() {
        eprintln!("{} check(s) failed:", failures.len());
        for c in failures {
            eprintln!("  {}: {:e} > {:e}", c.name, c.value, c.tolerance);
        }
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
