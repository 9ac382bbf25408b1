//! Command-line front end: `run`, `sweep`, `validate` and `report`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgobs::runner::{self, ScenarioConfig};
use sgobs::{Error, Result};

#[derive(Parser)]
#[command(version, about = "PMU-based generator state and parameter estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the noise seed of the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, estimate and write the time series and reports.
    Run { config: PathBuf },
    /// Monte-Carlo grid over noise multipliers and seeded replicas.
    Sweep {
        config: PathBuf,
        /// Noise-bound multipliers.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        replicas: usize,
        /// Worker threads (all cores by default).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check every invariant of a scenario file.
    Validate { config: PathBuf },
    /// Write per-figure slices for the runs found in a directory.
    Report { dir: PathBuf },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.dir = out.clone();
    }
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let art = runner::run(&cfg)?;
            if !cli.quiet {
                println!("wrote {}", cfg.outputs.dir.display());
                if let Some(p) = art.timeseries {
                    println!("  {}", p.display());
                }
            }
        }
        Command::Sweep {
            config,
            scales,
            replicas,
            threads,
        } => {
            let cfg = load(cli, config)?;
            let cells = runner::sweep(&cfg, scales, *replicas, *threads)?;
            let path = runner::write_sweep(&cells, &cfg.outputs.dir)?;
            if !cli.quiet {
                let faults = cells.iter().filter(|c| c.fault.is_some()).count();
                println!("{} cells, {faults} faulted; wrote {}", cells.len(), path.display());
            }
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(config)?;
            let diags = cfg.diagnostics();
            if !diags.is_empty() {
                for d in &diags {
                    eprintln!("{d}");
                }
                return Err(Error::ConfigList(Vec::new()));
            }
        }
        Command::Report { dir } => {
            let written = runner::report(dir)?;
            if !cli.quiet {
                for p in written {
                    println!("{}", p.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // diagnostics were already printed
        Err(Error::ConfigList(v)) if v.is_empty() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
