//! Tabular Q-learning tuner for the parameter values of one operator chain.
//!
//! Each step applies a complete parameter assignment to the original image
//! of the episode, scores the result against the ground truth and moves to
//! the state given by the discretised feature ratios of that result.

mod table;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::DatasetEntry;
use std::collections::HashMap;

use crate::imaging::{apply_chain, apply_steps, finish, ChainData};
use crate::metrics::{
    discretize_state, evaluate, EvalReport, Weights, DEFAULT_TOLERANCE, START_STATE,
};
use crate::orchestration::{ActionSpec, ActionTable};

pub use table::{q_update, select_action, LearnParams, Policy, QTable};

/// How results are scored against the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub weights: Weights,
    pub tol: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            weights: Weights::default(),
            tol: DEFAULT_TOLERANCE,
        }
    }
}

/// Outcome of one environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub next_state: usize,
}

/// Something an agent can act on by picking action indices.
pub trait Environment {
    fn action_count(&self) -> usize;
    fn step(&mut self, action: usize) -> Result<Step>;
}

/// Scores `(image, action)` pairs of one chain on a dataset, memoising
/// every evaluation. Operators are pure, so a cached report is identical
/// to a fresh one.
///
/// The output of the chain's first operator is cached too, keyed by image
/// and that operator's parameter digits; the pre-processing filter is the
/// most expensive step and many actions share it.
pub struct ChainEvaluator<'a> {
    dataset: &'a [DatasetEntry],
    table: &'a ActionTable,
    settings: EvalSettings,
    cache: Vec<Option<EvalReport>>,
    prefix: HashMap<(usize, Vec<usize>), ChainData>,
    evaluations: usize,
}

impl<'a> ChainEvaluator<'a> {
    pub fn new(
        dataset: &'a [DatasetEntry],
        table: &'a ActionTable,
        settings: EvalSettings,
    ) -> Self {
        ChainEvaluator {
            dataset,
            table,
            settings,
            cache: vec![None; dataset.len() * table.len()],
            prefix: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn dataset(&self) -> &'a [DatasetEntry] {
        self.dataset
    }

    pub fn table(&self) -> &'a ActionTable {
        self.table
    }

    /// Number of distinct (image, action) pairs actually computed.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn report(&mut self, image: usize, action: usize) -> Result<EvalReport> {
        let entry = self.dataset.get(image).ok_or_else(|| {
            Error::contract(format!(
                "image {image} outside dataset of {}",
                self.dataset.len()
            ))
        })?;
        let spec = self.table.get(action).ok_or_else(|| {
            Error::contract(format!("action {action} outside 0..{}", self.table.len()))
        })?;
        let slot = image * self.table.len() + action;
        if let Some(rep) = self.cache[slot] {
            return Ok(rep);
        }
        let chain = self.table.chain();
        let rep = if chain.operators.len() < 2 {
            evaluate_action(entry, self.table, spec, self.settings)?
        } else {
            let arity = chain.operators[0].kind.param_names().len();
            let digits = self
                .table
                .digits(action)
                .expect("action index checked above");
            let key = (image, digits[..arity].to_vec());
            let head = match self.prefix.get(&key) {
                Some(d) => d.clone(),
                None => {
                    let d = apply_steps(ChainData::Gray(entry.image.clone()), chain, spec, 0..1)?;
                    self.prefix.insert(key, d.clone());
                    d
                }
            };
            let tail = apply_steps(head, chain, spec, 1..chain.operators.len())?;
            let result = finish(tail, chain)?;
            evaluate(&result, &entry.gt, self.settings.weights, self.settings.tol)?
        };
        self.cache[slot] = Some(rep);
        self.evaluations += 1;
        Ok(rep)
    }

    /// Mean reward of `action` over the whole dataset, summed in image order.
    pub fn mean_reward(&mut self, action: usize) -> Result<f64> {
        let mut sum = 0.0;
        for i in 0..self.dataset.len() {
            sum += self.report(i, action)?.reward;
        }
        Ok(sum / self.dataset.len() as f64)
    }
}

/// Applies one action of the table's chain to an entry and scores it.
pub fn evaluate_action(
    entry: &DatasetEntry,
    table: &ActionTable,
    action: &ActionSpec,
    settings: EvalSettings,
) -> Result<EvalReport> {
    let result = apply_chain(&entry.image, table.chain(), action)?;
    evaluate(&result, &entry.gt, settings.weights, settings.tol)
}

/// One dataset image seen through a [`ChainEvaluator`].
pub struct ImageEnv<'e, 'a> {
    evaluator: &'e mut ChainEvaluator<'a>,
    image: usize,
}

impl<'e, 'a> ImageEnv<'e, 'a> {
    pub fn new(evaluator: &'e mut ChainEvaluator<'a>, image: usize) -> Self {
        ImageEnv { evaluator, image }
    }
}

impl Environment for ImageEnv<'_, '_> {
    fn action_count(&self) -> usize {
        self.evaluator.table.len()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let rep = self.evaluator.report(self.image, action)?;
        Ok(Step {
            reward: rep.reward,
            next_state: discretize_state(&rep.features),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub image: String,
    pub steps: usize,
    pub final_reward: f64,
}

/// Runs one episode from the start state; returns `(steps, final reward)`.
pub fn run_episode_in<E: Environment, R: Rng + ?Sized>(
    env: &mut E,
    q: &mut QTable,
    params: &LearnParams,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if env.action_count() != q.action_count() {
        return Err(Error::contract(format!(
            "environment has {} actions, Q-table {}",
            env.action_count(),
            q.action_count()
        )));
    }
    let mut state = START_STATE;
    let (mut steps, mut last) = (0, 0.0);
    while steps < params.max_steps {
        let action = select_action(q, state, params, rng)?;
        let step = env.step(action)?;
        q.update(state, action, step.reward, step.next_state, params)?;
        state = step.next_state;
        steps += 1;
        last = step.reward;
        if step.reward >= params.target_reward {
            break;
        }
    }
    Ok((steps, last))
}

/// One episode on dataset image `image`.
pub fn run_episode<R: Rng + ?Sized>(
    evaluator: &mut ChainEvaluator<'_>,
    image: usize,
    q: &mut QTable,
    params: &LearnParams,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let id = evaluator
        .dataset
        .get(image)
        .ok_or_else(|| Error::contract(format!("image {image} outside dataset")))?
        .id
        .clone();
    let (steps, final_reward) =
        run_episode_in(&mut ImageEnv::new(evaluator, image), q, params, rng)?;
    Ok(EpisodeRecord {
        image: id,
        steps,
        final_reward,
    })
}

/// Measured mean reward of one candidate action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub action: usize,
    pub max_q: f64,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_action: ActionSpec,
    pub best_action_index: usize,
    /// Mean reward of the best action over the dataset.
    pub best_quality: f64,
    pub q_table: QTable,
    pub episode_log: Vec<EpisodeRecord>,
    /// Candidates of the final sweep, in sweep order.
    pub sweep: Vec<CandidateScore>,
    pub evaluations: usize,
}

/// The `k` actions with the largest value in any state, best first, lower
/// index first on ties.
pub fn top_actions(q: &QTable, k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = q.action_maxima().into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Learns Q-values over `params.episodes` episodes, visiting dataset images
/// round-robin, then re-measures the top `sweep_k` actions on every image
/// and returns the one with the highest mean reward.
pub fn tune_chain(
    dataset: &[DatasetEntry],
    table: &ActionTable,
    params: &LearnParams,
    settings: EvalSettings,
) -> Result<TuneResult> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    params.validate()?;
    settings.weights.validate()?;
    let mut evaluator = ChainEvaluator::new(dataset, table, settings);
    let mut q = QTable::new(table.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut episode_log = Vec::with_capacity(params.episodes);
    for episode in 0..params.episodes {
        let image = episode % dataset.len();
        episode_log.push(run_episode(
            &mut evaluator,
            image,
            &mut q,
            params,
            &mut rng,
        )?);
    }

    let mut sweep = Vec::new();
    for (action, max_q) in top_actions(&q, params.sweep_k.min(table.len())) {
        let mean_reward = evaluator.mean_reward(action)?;
        sweep.push(CandidateScore {
            action,
            max_q,
            mean_reward,
        });
    }
    let best = sweep
        .iter()
        .copied()
        .reduce(|best, c| {
            if c.mean_reward > best.mean_reward
                || (c.mean_reward == best.mean_reward && c.action < best.action)
            {
                c
            } else {
                best
            }
        })
        .expect("at least one candidate");

    Ok(TuneResult {
        best_action: table.get(best.action).expect("index from table").clone(),
        best_action_index: best.action,
        best_quality: best.mean_reward,
        q_table: q,
        episode_log,
        sweep,
        evaluations: evaluator.evaluations(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Single state, fixed reward per action.
    struct Bandit {
        rewards: Vec<f64>,
    }

    impl Environment for Bandit {
        fn action_count(&self) -> usize {
            self.rewards.len()
        }

        fn step(&mut self, action: usize) -> Result<Step> {
            Ok(Step {
                reward: self.rewards[action],
                next_state: 0,
            })
        }
    }

    #[test]
    fn bandit_converges_with_zero_discount() {
        let rewards = vec![0.2, 0.9, 0.5, 0.1];
        let mut env = Bandit {
            rewards: rewards.clone(),
        };
        let p = LearnParams {
            gamma: 0.0,
            alpha: 0.1,
            ..LearnParams::default()
        };
        let mut q = QTable::new(4).unwrap();
        for _ in 0..1000 {
            for a in 0..4 {
                let s = env.step(a).unwrap();
                q.update(0, a, s.reward, s.next_state, &p).unwrap();
            }
        }
        for (a, r) in rewards.iter().enumerate() {
            assert!((q.get(0, a) - r).abs() < 1e-6);
        }
        assert_eq!(q.greedy(0), 1);
    }

    #[test]
    fn single_step_episodes() {
        let mut env = Bandit {
            rewards: vec![0.3, 0.4],
        };
        let mut q = QTable::new(2).unwrap();
        let p = LearnParams {
            max_steps: 1,
            ..LearnParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (steps, r) = run_episode_in(&mut env, &mut q, &p, &mut rng).unwrap();
        assert_eq!(steps, 1);
        assert_eq!(r, 0.3);
        let touched = (0..q.state_count())
            .flat_map(|s| (0..2).map(move |a| (s, a)))
            .filter(|&(s, a)| q.get(s, a) != 0.0)
            .count();
        assert_eq!(touched, 1);
    }

    #[test]
    fn zero_target_stops_after_first_step() {
        let mut env = Bandit {
            rewards: vec![0.0, 0.0, 0.0],
        };
        let mut q = QTable::new(3).unwrap();
        let p = LearnParams {
            target_reward: 0.0,
            ..LearnParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(run_episode_in(&mut env, &mut q, &p, &mut rng).unwrap().0, 1);
    }

    #[test]
    fn mismatched_table_rejected() {
        let mut env = Bandit {
            rewards: vec![0.5; 3],
        };
        let mut q = QTable::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_episode_in(&mut env, &mut q, &LearnParams::default(), &mut rng).is_err());
    }

    #[test]
    fn top_actions_order() {
        let mut q = QTable::new(5).unwrap();
        q.set(3, 4, 0.5).unwrap();
        q.set(100, 2, 0.5).unwrap();
        q.set(7, 1, 0.7).unwrap();
        let top: Vec<usize> = top_actions(&q, 4).into_iter().map(|t| t.0).collect();
        assert_eq!(top, vec![1, 2, 4, 0]);
        let fresh = QTable::new(9).unwrap();
        let top: Vec<usize> = top_actions(&fresh, 5).into_iter().map(|t| t.0).collect();
        assert_eq!(top, vec![0, 1, 2, 3, 4]);
    }
}
