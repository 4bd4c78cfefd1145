//! Command-line front end for the Monte Carlo experiment engine.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use molsync::harness::{
    optimize_threshold, run_experiment, sweep, write_run_outputs, write_sweep_csv,
    ExperimentConfig, Objective, SweepParam,
};

#[derive(Parser)]
#[command(name = "molsync", version, about = "Symbol synchronization simulator for molecular communication links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the block count.
    #[arg(long)]
    blocks: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    /// Output directory; without it, results go to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write summary.json, per_symbol.csv and
    /// histogram.csv.
    Run {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run one experiment per parameter value and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Parameter to sweep: snr, snr_a, snr_b, alpha, t_symb, beta, xi.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Pick the TT threshold minimizing an objective over a grid.
    OptimizeXi {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated threshold grid.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Objective to minimize: ber or mae.
        #[arg(long)]
        objective: String,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load_config(common: &CommonOpts) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text).context("parsing config")?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(blocks) = common.blocks {
        config.blocks = blocks;
    }
    Ok(config)
}

fn parse_values(csv: &str) -> Result<Vec<f64>> {
    csv.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("cannot parse '{v}' as a number"))
        })
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common } => {
            let config = load_config(&common)?;
            let result = run_experiment(&config, common.threads)?;
            eprintln!(
                "{} blocks in {:.2?}: BER {:.6e} ± {:.1e}, MAE {:.6e}",
                result.report.blocks,
                result.wall_time,
                result.report.ber,
                result.report.ber_stderr,
                result.report.mae_overall
            );
            match &common.out {
                Some(dir) => {
                    write_run_outputs(dir, &result)?;
                    eprintln!("results written to {}", dir.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&result)?),
            }
        }
        Command::Sweep { common, param, values } => {
            let config = load_config(&common)?;
            let param: SweepParam = param.parse().map_err(anyhow::Error::msg)?;
            let values = parse_values(&values)?;
            if values.is_empty() {
                bail!("sweep needs at least one value");
            }
            let result = sweep(&config, param, &values, common.threads)?;
            for point in &result.points {
                match (&point.result, &point.infeasible) {
                    (Some(r), _) => eprintln!(
                        "{:?} = {}: BER {:.6e} ± {:.1e}",
                        param, point.value, r.report.ber, r.report.ber_stderr
                    ),
                    (None, Some(reason)) => {
                        eprintln!("{:?} = {}: infeasible ({reason})", param, point.value)
                    }
                    _ => unreachable!(),
                }
            }
            match &common.out {
                Some(dir) => {
                    write_sweep_csv(dir, &result)?;
                    eprintln!("sweep written to {}", dir.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&result)?),
            }
        }
        Command::OptimizeXi { common, grid, objective } => {
            let config = load_config(&common)?;
            let grid = parse_values(&grid)?;
            let objective: Objective = objective.parse().map_err(anyhow::Error::msg)?;
            let outcome = optimize_threshold(&config, &grid, objective, common.threads)?;
            for (xi, value) in &outcome.points {
                eprintln!("xi = {xi}: {objective:?} = {value:.6e}");
            }
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(
                    dir.join("xi_optimize.json"),
                    serde_json::to_string_pretty(&outcome)? + "\n",
                )?;
            }
        }
    }
    Ok(())
}
