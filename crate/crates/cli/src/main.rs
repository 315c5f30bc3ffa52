use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gam_core::harness::{
    load_config, read_checkpoint, run, sweep, write_slice, Experiment, RunConfig, RunOptions,
    SliceRequest,
};
use gam_core::params::ParamVector;
use gam_core::Error;

#[derive(Parser)]
#[command(name = "gam", version, about = "Train and diagnose models with gradient-norm-aware minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its artifacts to `output_dir`.
    Run {
        config: PathBuf,
        /// Write 0 for wall-clock columns so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Train every (rho, alpha) pair concurrently.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        rho: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        alpha: Vec<f64>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Print a flatness report (JSON) for a checkpoint.
    Diagnose {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print the extrema census (JSON) at a checkpoint or the initial parameters.
    Census {
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write a 1-D or 2-D landscape slice as CSV.
    Slice {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        dim: u8,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Defaults to `<output_dir>/slice_<dim>d.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::NonFinite(_) | Error::NonFiniteStep { .. } => EXIT_DIVERGED,
        Error::Io { .. } | Error::Csv(_) | Error::Dataset(_) | Error::LabelOutOfRange { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn point(exp: &Experiment, checkpoint: Option<&Path>) -> Result<ParamVector, Error> {
    match checkpoint {
        Some(path) => {
            let p = read_checkpoint(path)?;
            if p.dim() != exp.param_count() {
                return Err(Error::DimensionMismatch {
                    context: "checkpoint",
                    expected: exp.param_count(),
                    found: p.dim(),
                });
            }
            exp.init.with_values(p.into_vec())
        }
        None => Ok(exp.init.clone()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn prepare(config: &Path) -> Result<(RunConfig, Experiment), Error> {
    let config = load_config(config)?;
    let exp = Experiment::prepare(&config)?;
    Ok((config, exp))
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { config, no_timing } => {
            let config = load_config(&config)?;
            let summary = run(
                &config,
                RunOptions {
                    record_timing: !no_timing,
                },
            )?;
            if let Some(reason) = &summary.divergence {
                log::error!("{reason}");
                return Ok(EXIT_DIVERGED);
            }
            log::info!(
                "finished {} epochs; final test accuracy {:?}, lambda_max {:?}",
                summary.rows.len(),
                summary.final_test_acc(),
                summary.final_lambda_max
            );
            Ok(0)
        }
        Command::Sweep {
            config,
            rho,
            alpha,
            no_timing,
        } => {
            let config = load_config(&config)?;
            let cells = sweep(
                &config,
                &rho,
                &alpha,
                RunOptions {
                    record_timing: !no_timing,
                },
            )?;
            let failed = cells.iter().filter(|c| c.status != "ok").count();
            log::info!("{} cells, {failed} not ok", cells.len());
            Ok(0)
        }
        Command::Diagnose { config, checkpoint } => {
            let (_, exp) = prepare(&config)?;
            let p = point(&exp, Some(&checkpoint))?;
            print_json(&exp.flatness_report(&p)?)?;
            Ok(0)
        }
        Command::Census { config, checkpoint } => {
            let (_, exp) = prepare(&config)?;
            let p = point(&exp, checkpoint.as_deref())?;
            print_json(&exp.census(&p)?.histogram)?;
            Ok(0)
        }
        Command::Slice {
            config,
            dim,
            checkpoint,
            seed,
            half_width,
            points,
            out,
        } => {
            let (config, exp) = prepare(&config)?;
            let p = point(&exp, checkpoint.as_deref())?;
            let request = SliceRequest {
                dim: dim.into(),
                seed,
                grid: gam_core::diagnostics::SliceSpec {
                    half_width,
                    points,
                    ..Default::default()
                },
            };
            let slice = exp.slice(&p, &request)?;
            let out = match out {
                Some(o) => o,
                None => {
                    std::fs::create_dir_all(&config.output_dir)
                        .map_err(|e| Error::io(&config.output_dir, e))?;
                    config.output_dir.join(format!("slice_{dim}d.csv"))
                }
            };
            write_slice(&out, &slice)?;
            println!("{}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
