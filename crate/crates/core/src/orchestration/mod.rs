//! Chain enumeration and the two search drivers.
//!
//! [`search`] hands every chain to its own Q-learning tuner; the chains
//! run in parallel and are joined by chain id. [`exhaustive_search`] scores
//! every (chain, action, image) triple and is the reference the learned
//! search is checked against.

mod chain;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::DatasetEntry;
use crate::qlearn::{evaluate_action, tune_chain, EvalSettings, LearnParams, TuneResult};

pub use chain::{
    enumerate_actions, enumerate_chains, ActionSpec, ActionTable, ChainSpec, OperatorKind,
    OperatorSpec, ParamValue, PhaseDef, Stage,
};

/// Default cap on the number of evaluations of [`exhaustive_search`].
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    QLearning,
    Exhaustive,
}

/// Best action found for one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub chain: ChainSpec,
    pub action_count: usize,
    pub best_action_index: usize,
    pub best_action: ActionSpec,
    pub best_quality: f64,
    /// Learner state; absent for exhaustive search.
    pub tuning: Option<TuneResult>,
    /// Mean reward of every action; present for exhaustive search only.
    pub action_rewards: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub chain_id: usize,
    pub action_index: usize,
    pub action: ActionSpec,
    pub quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: SearchMethod,
    pub chains: Vec<ChainOutcome>,
    pub winner: Winner,
}

impl SearchResult {
    pub fn winning_chain(&self) -> &ChainOutcome {
        self.chains
            .iter()
            .find(|c| c.chain.id == self.winner.chain_id)
            .expect("winner is one of the chains")
    }
}

/// Highest quality wins; the lowest chain id wins ties.
fn pick_winner(chains: &[ChainOutcome]) -> Winner {
    let best = chains
        .iter()
        .reduce(|best, c| {
            if c.best_quality > best.best_quality {
                c
            } else {
                best
            }
        })
        .expect("at least one chain");
    Winner {
        chain_id: best.chain.id,
        action_index: best.best_action_index,
        action: best.best_action.clone(),
        quality: best.best_quality,
    }
}

/// Seed of the tuner for chain `id`, derived from the run seed.
pub fn chain_seed(seed: u64, id: usize) -> u64 {
    seed.wrapping_add((id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn check_dataset(dataset: &[DatasetEntry]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(())
}

/// Tunes a single chain with Q-learning.
pub fn tune_one(
    dataset: &[DatasetEntry],
    chain: &ChainSpec,
    params: &LearnParams,
    settings: EvalSettings,
) -> Result<ChainOutcome> {
    let table = enumerate_actions(chain);
    let chain_params = LearnParams {
        seed: chain_seed(params.seed, chain.id),
        ..params.clone()
    };
    let tuned = tune_chain(dataset, &table, &chain_params, settings)?;
    Ok(ChainOutcome {
        chain: chain.clone(),
        action_count: table.len(),
        best_action_index: tuned.best_action_index,
        best_action: tuned.best_action.clone(),
        best_quality: tuned.best_quality,
        tuning: Some(tuned),
        action_rewards: None,
    })
}

/// Q-learning search over every chain built from `phases`.
pub fn search(
    dataset: &[DatasetEntry],
    phases: &[PhaseDef],
    params: &LearnParams,
    settings: EvalSettings,
) -> Result<SearchResult> {
    check_dataset(dataset)?;
    params.validate()?;
    let chains = enumerate_chains(phases)?;
    let outcomes = chains
        .par_iter()
        .map(|chain| tune_one(dataset, chain, params, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchResult {
        method: SearchMethod::QLearning,
        winner: pick_winner(&outcomes),
        chains: outcomes,
    })
}

/// Number of evaluations an exhaustive search over `chains` would need.
pub fn exhaustive_cost(chains: &[ChainSpec], images: usize) -> u64 {
    chains
        .iter()
        .map(|c| {
            c.radices()
                .iter()
                .fold(1u64, |acc, &r| acc.saturating_mul(r as u64))
        })
        .fold(0u64, |acc, n| {
            acc.saturating_add(n.saturating_mul(images as u64))
        })
}

/// Scores every action of `chain` on every image.
pub fn exhaustive_chain(
    dataset: &[DatasetEntry],
    chain: &ChainSpec,
    settings: EvalSettings,
) -> Result<ChainOutcome> {
    check_dataset(dataset)?;
    let table = enumerate_actions(chain);
    let rewards = table
        .actions()
        .par_iter()
        .map(|action| {
            let mut sum = 0.0;
            for entry in dataset {
                sum += evaluate_action(entry, &table, action, settings)?.reward;
            }
            Ok(sum / dataset.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (a, &r) in rewards.iter().enumerate() {
        if r > rewards[best] {
            best = a;
        }
    }
    Ok(ChainOutcome {
        chain: chain.clone(),
        action_count: table.len(),
        best_action_index: best,
        best_action: table.get(best).expect("non-empty table").clone(),
        best_quality: rewards[best],
        tuning: None,
        action_rewards: Some(rewards),
    })
}

/// Evaluates every (chain, action, image) triple, refusing when that
/// exceeds `budget` evaluations.
pub fn exhaustive_search(
    dataset: &[DatasetEntry],
    phases: &[PhaseDef],
    settings: EvalSettings,
    budget: u64,
) -> Result<SearchResult> {
    check_dataset(dataset)?;
    settings.weights.validate()?;
    let chains = enumerate_chains(phases)?;
    let required = exhaustive_cost(&chains, dataset.len());
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let outcomes = chains
        .par_iter()
        .map(|chain| exhaustive_chain(dataset, chain, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchResult {
        method: SearchMethod::Exhaustive,
        winner: pick_winner(&outcomes),
        chains: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{dataset_from_synth, synthesize, ProblemConfig, SynthOptions};

    fn data(count: usize) -> Vec<DatasetEntry> {
        let opts = SynthOptions {
            count,
            size: 32,
            ..SynthOptions::default()
        };
        dataset_from_synth(synthesize(&opts).unwrap()).unwrap()
    }

    fn small_phases() -> Vec<PhaseDef> {
        ProblemConfig::parse(
            "phases = pre, edge, post\nphase.pre = medfilt2, wiener2\nphase.edge = edge\n\
             phase.post = bwareaopen\nedge.method = sobel, log\nedge.threshold = 0.03, 0.08\n\
             bwareaopen.min_size = 10\nbwareaopen.connectivity = 8\n",
        )
        .unwrap()
        .phases
    }

    #[test]
    fn shared_prefix_matches_fresh_evaluation() {
        let d = data(3);
        let chains = enumerate_chains(&small_phases()).unwrap();
        for chain in &chains {
            let table = enumerate_actions(chain);
            let mut ev = crate::qlearn::ChainEvaluator::new(&d, &table, EvalSettings::default());
            for a in (0..table.len()).rev() {
                for (i, entry) in d.iter().enumerate() {
                    let fresh = crate::qlearn::evaluate_action(
                        entry,
                        &table,
                        table.get(a).unwrap(),
                        EvalSettings::default(),
                    )
                    .unwrap();
                    assert_eq!(ev.report(i, a).unwrap(), fresh);
                }
            }
        }
    }

    #[test]
    fn budget_refusal_names_cost() {
        let d = data(2);
        let phases = ProblemConfig::default().phases;
        match exhaustive_search(&d, &phases, EvalSettings::default(), 2000) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!((required, budget), (3 * 432 * 2, 2000));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_chain_single_action() {
        let d = data(3);
        let phases = ProblemConfig::parse(
            "phases = a\nphase.a = edge\nedge.method = prewitt\nedge.threshold = 0.05\n",
        )
        .unwrap()
        .phases;
        let res = search(
            &d,
            &phases,
            &LearnParams::default(),
            EvalSettings::default(),
        )
        .unwrap();
        let chain = &enumerate_chains(&phases).unwrap()[0];
        let table = enumerate_actions(chain);
        let mean = d
            .iter()
            .map(|e| evaluate_action(e, &table, table.get(0).unwrap(), EvalSettings::default()))
            .map(|r| r.unwrap().reward)
            .sum::<f64>()
            / 3.0;
        assert_eq!(res.winner.chain_id, 0);
        assert_eq!(res.winner.action_index, 0);
        assert_eq!(res.winner.quality, mean);
    }

    #[test]
    fn oracle_bounds_learner_and_full_sweep_matches() {
        let d = data(3);
        let phases = small_phases();
        let settings = EvalSettings::default();
        let ex = exhaustive_search(&d, &phases, settings, DEFAULT_BUDGET).unwrap();
        let params = LearnParams {
            episodes: 30,
            ..LearnParams::default()
        };
        let learned = search(&d, &phases, &params, settings).unwrap();
        assert!(ex.winner.quality >= learned.winner.quality);

        let full = LearnParams {
            epsilon: 1.0,
            sweep_k: 8,
            episodes: 20,
            seed: 5,
            ..LearnParams::default()
        };
        let swept = search(&d, &phases, &full, settings).unwrap();
        assert_eq!(swept.winner, ex.winner);
        for (a, b) in swept.chains.iter().zip(&ex.chains) {
            let rewards = b.action_rewards.as_ref().unwrap();
            let best = rewards.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(a.best_quality, best);
        }
    }

    #[test]
    fn deterministic_and_chain_ids_in_order() {
        let d = data(2);
        let phases = small_phases();
        let params = LearnParams {
            episodes: 10,
            seed: 3,
            ..LearnParams::default()
        };
        let a = search(&d, &phases, &params, EvalSettings::default()).unwrap();
        let b = search(&d, &phases, &params, EvalSettings::default()).unwrap();
        assert_eq!(a, b);
        let ids: Vec<usize> = a.chains.iter().map(|c| c.chain.id).collect();
        assert_eq!(ids, [0, 1]);
        let e1 = exhaustive_search(&d, &phases, EvalSettings::default(), 100).unwrap();
        let e2 = exhaustive_search(&d, &phases, EvalSettings::default(), 100).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn empty_dataset_rejected() {
        let phases = small_phases();
        assert!(search(
            &[],
            &phases,
            &LearnParams::default(),
            EvalSettings::default()
        )
        .is_err());
        assert!(exhaustive_search(&[], &phases, EvalSettings::default(), 100).is_err());
    }

    #[test]
    fn ties_go_to_lowest_chain() {
        let d = data(2);
        let phases = ProblemConfig::parse(
            "phases = a, b\nphase.a = wiener2, wiener2\nphase.b = edge\nwiener2.size = 3\n\
             edge.method = sobel\nedge.threshold = 0.05\n",
        )
        .unwrap()
        .phases;
        let res = exhaustive_search(&d, &phases, EvalSettings::default(), 100).unwrap();
        assert_eq!(res.chains[0].best_quality, res.chains[1].best_quality);
        assert_eq!(res.winner.chain_id, 0);
    }
}
