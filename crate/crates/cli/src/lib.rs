//! Command-line front end: encoding-comparison experiments, importance
//! reports and mesh decomposition, driven by JSON configs.
//!
//! Exit codes: 0 success, 2 config or usage error, 3 invalid input, 4
//! numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decompose;
mod error;
pub mod experiment;
pub mod importance;

use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

use config::{load_config, ExperimentConfig, ImportanceConfig};
use experiment::{run_experiment, summary_table, ExperimentOptions};
use importance::{describe, run_importance, Grid, ImportanceMode};

#[derive(Debug, Parser)]
#[command(name = "pel", version, about = "Photonic encoding laboratory")]
pub struct Cli {
    /// Worker threads for trials and importance maps [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every configured encoding over a range of seeds.
    Experiment(ExperimentArgs),
    /// Feature importance along one axis or over the whole dataset.
    Importance(ImportanceArgs),
    /// Program a Clements mesh from a unitary matrix.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Added to every seed, so seeds run from N to N + n_seeds - 1.
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub seed_offset: u64,
    /// Output directory, overriding the config's output_dir.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["sweep", "map"])))]
pub struct ImportanceArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Sweep feature J along its axis, other features at zero.
    #[arg(long, value_name = "J", requires = "grid")]
    pub sweep: Option<usize>,
    /// Sweep grid, `lo:hi:steps`.
    #[arg(
        long,
        value_name = "LO:HI:STEPS",
        allow_hyphen_values = true,
        requires = "sweep"
    )]
    pub grid: Option<Grid>,
    /// Aggregate importance over every sample of the dataset.
    #[arg(long)]
    pub map: bool,
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// JSON rows of `[re, im]` pairs.
    pub matrix_file: PathBuf,
}

/// Run a parsed command, writing the report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be >= 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let report = pool.install(|| dispatch(cli.command))?;
    out.write_all(report.as_bytes())
        .map_err(|e| CliError::Config(format!("cannot write output: {e}")))
}

fn dispatch(command: Command) -> CliResult<String> {
    Ok(match command {
        Command::Experiment(args) => {
            let loaded = load_config::<ExperimentConfig>(&args.config)?;
            let opts = ExperimentOptions {
                seed_offset: args.seed_offset,
                output: args.output,
            };
            let outcome = run_experiment(&loaded, &opts)?;
            format!(
                "{}wrote {}\n",
                summary_table(&outcome.summary),
                outcome.output_dir.display()
            )
        }
        Command::Importance(args) => {
            let loaded = load_config::<ImportanceConfig>(&args.config)?;
            let mode = match (args.sweep, args.grid) {
                (Some(axis), Some(grid)) => ImportanceMode::Sweep { axis, grid },
                _ => ImportanceMode::Map,
            };
            describe(&run_importance(&loaded, mode, args.output)?)
        }
        Command::Decompose(args) => {
            let d = decompose::decompose_file(&args.matrix_file)?;
            format!(
                "{}\nreconstruction error: {:e}\n",
                serde_json::to_string_pretty(&d.mesh).expect("mesh serializes"),
                d.reconstruction_error
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn map_and_sweep_conflict() {
        let err = Cli::try_parse_from([
            "pel",
            "importance",
            "--config",
            "c.json",
            "--map",
            "--sweep",
            "0",
            "--grid",
            "-1:1:3",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from(["pel", "importance", "--config", "c.json"]).is_err());
        assert!(
            Cli::try_parse_from(["pel", "importance", "--config", "c.json", "--sweep", "0"])
                .is_err()
        );
        let ok = Cli::try_parse_from([
            "pel",
            "importance",
            "--config",
            "c.json",
            "--sweep",
            "1",
            "--grid",
            "-1:1:3",
        ])
        .unwrap();
        let Command::Importance(args) = ok.command else {
            panic!("importance expected")
        };
        assert_eq!(args.grid.unwrap().lo, -1.0);
    }
}
