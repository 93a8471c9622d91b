use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use descriptor_minimax::simulate::Disturbance;
use dmx_cli::io::{read_trajectory_file, write_trajectory_file};
use dmx_cli::{parse_config, run, CliError, Command, Mode, ResultReport, RunOptions, EXIT_ERROR};

#[derive(Debug, Parser)]
#[command(name = "descriptor-minimax", version, about = "Minimax state estimation for descriptor systems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Problem configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Observation CSV with header `k,y0,...`.
    #[arg(long, global = true, value_name = "PATH")]
    observations: Option<PathBuf>,

    /// Report file; for `simulate`, the directory receiving the trajectories.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Oracle sample count for `validate`.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Overrides the configured grid of a continuous problem.
    #[arg(long, global = true)]
    grid_steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Minimax estimate of the configured functional.
    Estimate {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Recursive filter for a discrete DAE.
    Filter,
    /// Riccati filter for a continuous DAE.
    Riccati,
    /// Tikhonov approximations for a continuous DAE.
    Tikhonov,
    /// Forward simulation with disturbances from the bounding set.
    Simulate {
        #[arg(long, default_value = "boundary", value_parser = parse_disturbance)]
        disturbance: Disturbance,
    },
    /// Checks an a posteriori report against reachability samples.
    Validate {
        /// Report to check; computed from the config when absent.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Validates the configuration only.
    Check,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn parse_disturbance(s: &str) -> Result<Disturbance, String> {
    s.parse::<Disturbance>().map_err(|e| e.to_string())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DESCRIPTOR_MINIMAX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("DESCRIPTOR_MINIMAX_THREADS must be a positive integer, got '{value}'"))
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn read_report(path: &Path) -> Result<ResultReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Writes to stdout; a closed pipe on the reading side is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    let config_path = cli.config.as_deref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let config = parse_config(config_path)?;

    let command = match cli.command {
        Sub::Estimate { mode } => Command::Estimate { mode },
        Sub::Filter => Command::Filter,
        Sub::Riccati => Command::Riccati,
        Sub::Tikhonov => Command::Tikhonov,
        Sub::Simulate { disturbance } => Command::Simulate { disturbance },
        Sub::Validate { report } => {
            Command::Validate { report: report.as_deref().map(read_report).transpose()?.map(Box::new) }
        }
        Sub::Check => Command::Check,
    };
    if matches!(command, Command::Simulate { .. }) && cli.output.is_none() {
        return Err(CliError::Usage("simulate needs --output DIR for the trajectory files".into()));
    }

    let observations = cli.observations.as_deref().map(|p| read_trajectory_file(p, "y")).transpose()?;
    let opts = RunOptions { observations, seed: cli.seed, samples: cli.samples, grid_steps: cli.grid_steps };
    let outcome = run(&command, &config, &opts)?;

    let json = outcome.report.to_json();
    match (&outcome.trajectories, &cli.output) {
        (Some(traj), Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            write_trajectory_file(&dir.join("states.csv"), "x", &traj.states)?;
            write_trajectory_file(&dir.join("observations.csv"), "y", &traj.observations)?;
            emit(&json)?;
        }
        (None, Some(path)) => {
            std::fs::write(path, format!("{json}\n")).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        _ => emit(&json)?,
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
