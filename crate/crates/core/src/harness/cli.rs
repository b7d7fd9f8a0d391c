//! Command-line driver.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::ProblemConfig;
use super::report::{emit_report, evaluation_csv, write_results};
use super::synth::{generate_synthetic_dataset, SynthOptions};
use super::{load_dataset, DatasetEntry};
use crate::error::{Error, Result};
use crate::orchestration::{
    enumerate_actions, enumerate_chains, exhaustive_search, search, tune_one, SearchMethod,
    SearchResult, Winner,
};

#[derive(Parser, Debug)]
#[command(
    name = "opchain",
    version,
    about = "Select an operator chain and its parameters for contour segmentation"
)]
struct Cli {
    /// Problem definition file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides `output` of the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset directory; overrides `dataset` of the config.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset of PGM image / ground-truth pairs.
    Generate {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Standard deviation of the additive Gaussian noise, intensities in [0, 1].
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Q-learning search over every chain.
    Search,
    /// Score every chain, action and image.
    Exhaustive {
        /// Maximum number of evaluations; overrides `budget` of the config.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Q-learning on a single chain.
    Tune {
        #[arg(long)]
        chain: usize,
    },
    /// Apply one action of one chain to every image.
    Evaluate {
        #[arg(long)]
        chain: usize,
        #[arg(long)]
        action: usize,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on a runtime error, 2 on bad usage.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ProblemConfig::load(path)?,
        None => ProblemConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.learn.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_path = out;
    }
    if let Some(data) = cli.data {
        cfg.dataset_path = data;
    }

    match cli.command {
        Command::Generate { count, size, noise } => {
            let opts = SynthOptions {
                count,
                size,
                noise_sigma: noise,
                seed: cfg.learn.seed,
            };
            let files = generate_synthetic_dataset(&opts, &cfg.dataset_path)?;
            println!(
                "wrote {} files to {}",
                files.len(),
                cfg.dataset_path.display()
            );
            Ok(())
        }
        Command::Search => {
            let data = load_dataset(&cfg.dataset_path)?;
            let res = search(&data, &cfg.phases, &cfg.learn, cfg.settings())?;
            finish(&res, &cfg, &data)
        }
        Command::Exhaustive { budget } => {
            let data = load_dataset(&cfg.dataset_path)?;
            let budget = budget.unwrap_or(cfg.budget);
            let res = exhaustive_search(&data, &cfg.phases, cfg.settings(), budget)?;
            finish(&res, &cfg, &data)
        }
        Command::Tune { chain } => {
            let data = load_dataset(&cfg.dataset_path)?;
            let chains = enumerate_chains(&cfg.phases)?;
            let spec = chains
                .get(chain)
                .ok_or_else(|| chain_range(chain, chains.len()))?;
            let outcome = tune_one(&data, spec, &cfg.learn, cfg.settings())?;
            let res = SearchResult {
                method: SearchMethod::QLearning,
                winner: Winner {
                    chain_id: spec.id,
                    action_index: outcome.best_action_index,
                    action: outcome.best_action.clone(),
                    quality: outcome.best_quality,
                },
                chains: vec![outcome],
            };
            finish(&res, &cfg, &data)
        }
        Command::Evaluate { chain, action } => {
            let data = load_dataset(&cfg.dataset_path)?;
            let chains = enumerate_chains(&cfg.phases)?;
            let spec = chains
                .get(chain)
                .ok_or_else(|| chain_range(chain, chains.len()))?;
            let table = enumerate_actions(spec);
            let act = table.get(action).ok_or_else(|| {
                Error::invalid(format!(
                    "action {action} out of range: chain {chain} has actions 0..={}",
                    table.len() - 1
                ))
            })?;
            let out = &cfg.output_path;
            let reports = write_results(&out.join("results"), &data, spec, act, cfg.settings())?;
            let path = out.join("evaluation.csv");
            fs::write(&path, evaluation_csv(&data, &reports)).map_err(|e| Error::io(&path, e))?;
            let mean = reports.iter().map(|r| r.reward).sum::<f64>() / reports.len() as f64;
            println!(
                "chain {chain} ({}) action {action} [{act}]: mean reward {mean:.6} over {} images",
                spec.label(),
                data.len()
            );
            Ok(())
        }
    }
}

fn chain_range(chain: usize, n: usize) -> Error {
    Error::invalid(format!(
        "chain {chain} out of range: valid chains are 0..={}",
        n - 1
    ))
}

fn finish(res: &SearchResult, cfg: &ProblemConfig, data: &[DatasetEntry]) -> Result<()> {
    emit_report(res, cfg, data, &cfg.output_path)?;
    let win = res.winning_chain();
    println!(
        "winner: chain {} ({}) action {} [{}] quality {:.6}",
        res.winner.chain_id,
        win.chain.label(),
        res.winner.action_index,
        res.winner.action,
        res.winner.quality
    );
    println!("report written to {}", cfg.output_path.display());
    Ok(())
}
