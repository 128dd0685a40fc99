use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use geoflow_cli::{run_experiment, CliError, ExperimentConfig, ExperimentKind};

/// Geodesic-flow experiments driven by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "geoflow", version)]
struct Args {
    #[arg(value_enum)]
    command: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<i32, CliError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let (report, _) = run_experiment(args.command, &config, &args.out)?;
    println!("{} finished: {:?}, outputs in {}", report.command, report.status, args.out.display());
    Ok(report.status.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match run(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
