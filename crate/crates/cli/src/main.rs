//! `rydcount`: approximate model counting for blockade graphs by sampling
//! quenched Rydberg arrays.

mod commands;
mod config;
mod error;
mod record;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rydcount_core::instance::{build_chain, build_grid, punch_grid, to_cnf, BlockadeGraph};

use commands::{CountOptions, Model, SampleOptions, SurvivalOptions};
use config::{RunFlags, Settings};
use error::CliError;
use record::{emit, ExperimentRecord};

#[derive(Parser, Debug)]
#[command(
    name = "rydcount",
    version,
    about = "Count independent sets of blockade graphs by quench sampling"
)]
struct Cli {
    /// TOML file with default run settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent runs or instances
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output file (stdout when absent)
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Write wall-clock timings to this JSON file
    #[arg(long, global = true)]
    timings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a standard instance
    Gen {
        #[command(subcommand)]
        shape: Shape,
        #[arg(long, value_enum, default_value = "json", global = true)]
        format: GenFormat,
    },
    /// Estimate the number of independent sets
    Count {
        /// Instance file or generator (chain:N, grid:LxW, punched:LxW:h1,h2)
        instance: String,
        #[command(flatten)]
        flags: RunFlags,
        /// Independent runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Use exactly uniform samples instead of quench dynamics
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: TableFormat,
    },
    /// Sample independent sets and report the distribution
    Sample {
        instance: String,
        #[command(flatten)]
        flags: RunFlags,
        #[command(flatten)]
        mode: SampleMode,
    },
    /// Non-uniformity of the sampled distribution
    Eta {
        instance: String,
        #[command(flatten)]
        flags: RunFlags,
        #[command(flatten)]
        mode: SampleMode,
    },
    /// Time-averaged survival probability of the all-ground state
    Survival {
        #[arg(required = true)]
        instances: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
        /// Random times per instance, uniform in [t_min, t_max]
        #[arg(long, default_value_t = 200)]
        n_times: usize,
        #[arg(long, value_enum, default_value = "pxp")]
        model: Model,
        /// Grid start:stop:step for survival curves
        #[arg(long)]
        t_grid: Option<String>,
        /// Directory for per-instance curve CSV files
        #[arg(long)]
        curve_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: TableFormat,
    },
    /// Rerun a saved record and check the output is byte-identical
    Replay { record: PathBuf },
}

#[derive(Subcommand, Debug)]
enum Shape {
    Chain {
        n: usize,
    },
    Grid {
        lx: usize,
        ly: usize,
    },
    Punched {
        lx: usize,
        ly: usize,
        /// Comma-separated labels to remove
        #[arg(long, default_value = "")]
        holes: String,
    },
}

#[derive(clap::Args, Debug)]
struct SampleMode {
    /// Exact distribution instead of measured frequencies
    #[arg(long)]
    exact: bool,
    /// Exactly uniform samples
    #[arg(long)]
    oracle: bool,
    /// Non-uniformity after each feed-forward step
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenFormat {
    Json,
    Dimacs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
}

fn instance(arg: &str) -> Result<(String, BlockadeGraph), CliError> {
    Ok((arg.to_string(), source::load(arg)?))
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let settings = |flags: &RunFlags| Settings::resolve(flags, cli.config.as_ref());
    let out = match &cli.command {
        Command::Gen { shape, format } => {
            let g = match shape {
                Shape::Chain { n } => build_chain(*n)?,
                Shape::Grid { lx, ly } => build_grid(*lx, *ly)?,
                Shape::Punched { lx, ly, holes } => punch_grid(&build_grid(*lx, *ly)?, &source::parse_holes(holes)?)?,
            };
            match format {
                GenFormat::Json => g.to_json_pretty() + "\n",
                GenFormat::Dimacs => to_cnf(&g),
            }
        }
        Command::Count {
            instance: arg,
            flags,
            runs,
            oracle,
            format,
        } => {
            let s = settings(flags)?;
            let (name, g) = instance(arg)?;
            let opts = CountOptions {
                runs: *runs,
                oracle: *oracle,
            };
            let out = commands::count(&name, &g, &s, &opts, cli.jobs)?;
            match format {
                TableFormat::Json => out.record.to_pretty(),
                TableFormat::Csv => out.csv,
            }
        }
        Command::Sample {
            instance: arg,
            flags,
            mode,
        }
        | Command::Eta {
            instance: arg,
            flags,
            mode,
        } => {
            let s = settings(flags)?;
            let (name, g) = instance(arg)?;
            let opts = SampleOptions {
                exact: mode.exact,
                oracle: mode.oracle,
                trace: mode.trace,
                distribution: matches!(cli.command, Command::Sample { .. }),
            };
            commands::sample(&name, &g, &s, &opts)?.to_pretty()
        }
        Command::Survival {
            instances,
            flags,
            n_times,
            model,
            t_grid,
            curve_dir,
            format,
        } => {
            let s = settings(flags)?;
            let graphs = instances.iter().map(|i| instance(i)).collect::<Result<Vec<_>, _>>()?;
            if let Some(dir) = curve_dir {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
            }
            let opts = SurvivalOptions {
                n_times: *n_times,
                model: *model,
                t_grid: t_grid.clone(),
                curve_dir: curve_dir.clone(),
            };
            let rec = commands::survival(&graphs, &s, &opts, cli.jobs)?;
            match format {
                TableFormat::Json => rec.to_pretty(),
                TableFormat::Csv => commands::survival_csv(&rec),
            }
        }
        Command::Replay { record } => {
            let text = std::fs::read_to_string(record).map_err(|e| CliError::Io(record.display().to_string(), e))?;
            let saved: ExperimentRecord = serde_json::from_str(&text)?;
            let fresh = commands::rerun(&saved, cli.jobs)?.to_pretty();
            if fresh != text {
                return Err(CliError::Mismatch(format!(
                    "replay of {} differs from the saved record",
                    record.display()
                )));
            }
            format!("replay of {} matches\n", record.display())
        }
    };
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = run(&cli).and_then(|text| {
        // replay only reports to stdout; never overwrite the record it checked
        let target = match cli.command {
            Command::Replay { .. } => None,
            _ => cli.out.as_deref(),
        };
        emit(target, &text)
    });
    let result = result.and_then(|()| match &cli.timings {
        Some(path) => {
            let t = json!({ "seconds": started.elapsed().as_secs_f64() });
            emit(Some(path), &format!("{t}\n"))
        }
        None => Ok(()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rydcount: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
