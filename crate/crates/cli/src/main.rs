use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koopman_lyap_cli::{execute, load_config, CliError, Stage};

#[derive(Parser)]
#[command(name = "koopman-lyap", version, about = "Koopman-eigenfunction Lyapunov functions with CPA certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file.
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Jacobian, eigenvalues and left eigenvectors at the origin.
    Linearize(Common),
    /// Solve the collocation problem for every eigenvalue.
    Eigenfunctions(Common),
    /// Eigenfunctions plus V*, its orbital derivative and diagnostics.
    Lyapunov(Common),
    /// CPA certification from previously written coefficients.
    Certify(Common),
    /// Compare eigenfunctions with the path-integral formula.
    OracleCheck(Common),
    /// The whole pipeline.
    Run(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (stage, common) = match cli.command {
        Command::Linearize(c) => (Stage::Linearize, c),
        Command::Eigenfunctions(c) => (Stage::Eigenfunctions, c),
        Command::Lyapunov(c) => (Stage::Lyapunov, c),
        Command::Certify(c) => (Stage::Certify, c),
        Command::OracleCheck(c) => (Stage::OracleCheck, c),
        Command::Run(c) => (Stage::Run, c),
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::validation("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure thread pool: {e}")))?;
    }
    let mut config = load_config(&common.config)?;
    if let Some(dir) = common.output_dir {
        config.output_dir = dir;
    }
    let manifest = execute(stage, &config)?;
    println!("wrote {} files to {}", manifest.files.len() + 1, config.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
