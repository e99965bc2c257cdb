use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggnash::analysis::{measure_prop4_constants, prop4_bound};
use aggnash::experiments::{
    concurrence_iterations, emit_tables, error_table, gossip_model, mixing_summary, mixing_table, path_rng,
    prepare_instance, run_experiment_with, ExperimentConfig, StepsizeSpec, Table,
};
use aggnash::gossip::StepsizeMode;
use aggnash::TopologyKind;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

/// Distributed Nash equilibrium seeking experiments on networked Cournot games.
#[derive(Parser)]
#[command(name = "aggnash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo error study of one configuration.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Directory for CSV and text tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gossip ticks until every estimate tracks the aggregate.
    Concurrence {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
    },
    /// Mixing rate and update-probability spread per topology.
    Lambda {
        #[arg(long, default_value_t = 20)]
        players: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to these topologies (cycle, wheel, grid, complete, random_connected).
        #[arg(long, value_parser = parse_topology, num_args = 1..)]
        topology: Vec<TopologyKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference equilibrium of the configured game, as JSON.
    Oracle {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Measured constants and the constant-step error bound for a gossip configuration.
    Bounds {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of sample paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides the iteration budget.
    #[arg(long)]
    iters: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.sample_paths = paths;
        }
        if let Some(iters) = self.iters {
            cfg.iters = iters;
            cfg.checkpoints.retain(|&c| c <= iters);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_topology(s: &str) -> Result<TopologyKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase().replace('-', "_")))
        .map_err(|_| format!("unknown topology `{s}`"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn show(table: &Table, out: Option<&Path>) -> Result<()> {
    table.write_text(std::io::stdout().lock())?;
    if let Some(dir) = out {
        for path in emit_tables(dir, std::slice::from_ref(table))? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, out } => {
            let cfg = common.load()?;
            let instance = prepare_instance(&cfg)?;
            let report = run_experiment_with(&cfg, &instance)?;
            show(&error_table("errors", std::slice::from_ref(&report)), out.as_deref())?;
            if let Some(dir) = out {
                fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::Concurrence { common, threshold } => {
            let cfg = common.load()?;
            print_json(&concurrence_iterations(&cfg, threshold)?)?;
        }
        Command::Lambda {
            players,
            seed,
            topology,
            out,
        } => {
            let kinds = if topology.is_empty() {
                vec![TopologyKind::Cycle, TopologyKind::Wheel, TopologyKind::Grid, TopologyKind::Complete]
            } else {
                topology
            };
            let rows = kinds
                .into_iter()
                .map(|k| mixing_summary(k, players, seed))
                .collect::<Result<Vec<_>, _>>()?;
            show(&mixing_table("mixing", &rows), out.as_deref())?;
        }
        Command::Oracle { common } => {
            let cfg = common.load()?;
            print_json(&prepare_instance(&cfg)?.solution)?;
        }
        Command::Bounds { common, samples } => {
            let cfg = common.load()?;
            let instance = prepare_instance(&cfg)?;
            let n = instance.game.n_players();
            let mut rng = path_rng(cfg.master_seed, 0);
            let alphas = match cfg.stepsize {
                StepsizeSpec::UniformConstant { lo, hi } if lo == hi => vec![lo; n],
                StepsizeSpec::UniformConstant { lo, hi } => match StepsizeMode::sample_constant(n, lo, hi, &mut rng) {
                    StepsizeMode::Constant { alphas } => alphas,
                    StepsizeMode::UpdateCount { .. } => unreachable!(),
                },
                _ => bail!("bounds need a gossip configuration with uniform_constant stepsizes"),
            };
            let model = gossip_model(&cfg, n)?;
            let constants = measure_prop4_constants(&instance.game, &model, &alphas, samples, &mut rng)?;
            let bound = prop4_bound(&constants)?;
            print_json(&serde_json::json!({ "constants": constants, "bound": bound }))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
