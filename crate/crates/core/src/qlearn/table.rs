use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::STATE_COUNT;

/// Action-selection policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Greedy,
    EpsilonGreedy,
    Boltzmann,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(Policy::Greedy),
            "epsilon-greedy" | "epsilon_greedy" | "egreedy" => Ok(Policy::EpsilonGreedy),
            "boltzmann" | "softmax" => Ok(Policy::Boltzmann),
            other => Err(Error::invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// Learning-rate, discount, exploration and budget settings of one tuner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub temperature: f64,
    pub policy: Policy,
    pub episodes: usize,
    pub max_steps: usize,
    /// An episode ends once a step's reward reaches this value.
    pub target_reward: f64,
    pub seed: u64,
    /// Number of top-valued actions re-measured on the whole dataset after
    /// learning.
    pub sweep_k: usize,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.1,
            temperature: 0.1,
            policy: Policy::EpsilonGreedy,
            episodes: 200,
            max_steps: 20,
            target_reward: 0.95,
            seed: 0,
            sweep_k: 5,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(what.to_string()))
            }
        };
        check(
            self.alpha > 0.0 && self.alpha <= 1.0,
            "alpha must lie in (0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.gamma),
            "gamma must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.epsilon),
            "epsilon must lie in [0, 1]",
        )?;
        check(
            self.temperature > 0.0 && self.temperature.is_finite(),
            "temperature must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.target_reward),
            "target_reward must lie in [0, 1]",
        )?;
        check(self.sweep_k >= 1, "sweep_k must be at least 1")
    }
}

/// Dense Q-value table over `STATE_COUNT` states and a fixed action count.
/// All values start at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    action_count: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(action_count: usize) -> Result<Self> {
        if action_count == 0 {
            return Err(Error::contract("a Q-table needs at least one action"));
        }
        Ok(QTable {
            action_count,
            values: vec![0.0; STATE_COUNT * action_count],
        })
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn state_count(&self) -> usize {
        STATE_COUNT
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= STATE_COUNT || action >= self.action_count {
            return Err(Error::contract(format!(
                "(state {state}, action {action}) outside {STATE_COUNT}x{}",
                self.action_count
            )));
        }
        Ok(())
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.action_count + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        self.check(state, action)?;
        if !value.is_finite() {
            return Err(Error::contract(format!("non-finite Q-value {value}")));
        }
        self.values[state * self.action_count + action] = value;
        Ok(())
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.action_count..(state + 1) * self.action_count]
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action in `state`, lowest index on ties.
    pub fn greedy(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    /// Best value of each action over all states.
    pub fn action_maxima(&self) -> Vec<f64> {
        let mut best = vec![f64::NEG_INFINITY; self.action_count];
        for row in self.values.chunks_exact(self.action_count) {
            for (b, &v) in best.iter_mut().zip(row) {
                *b = b.max(v);
            }
        }
        best
    }

    /// One-step Q-learning update of cell `(s, a)`:
    /// `Q(s,a) += alpha * (r + gamma * max_b Q(s', b) - Q(s,a))`.
    pub fn update(
        &mut self,
        s: usize,
        a: usize,
        reward: f64,
        s_next: usize,
        params: &LearnParams,
    ) -> Result<()> {
        self.check(s, a)?;
        self.check(s_next, 0)?;
        let old = self.get(s, a);
        let target = reward + params.gamma * self.max_value(s_next);
        self.set(s, a, old + params.alpha * (target - old))
    }
}

/// Free-function form of [`QTable::update`].
pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    s_next: usize,
    params: &LearnParams,
) -> Result<()> {
    q.update(s, a, reward, s_next, params)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Picks an action for `state` under `params.policy`.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    params: &LearnParams,
    rng: &mut R,
) -> Result<usize> {
    q.check(state, 0)?;
    let n = q.action_count();
    Ok(match params.policy {
        Policy::Greedy => q.greedy(state),
        Policy::EpsilonGreedy => {
            if params.epsilon > 0.0 && rng.random::<f64>() < params.epsilon {
                rng.random_range(0..n)
            } else {
                q.greedy(state)
            }
        }
        Policy::Boltzmann => {
            let row = q.row(state);
            let max = q.max_value(state);
            let weights: Vec<f64> = row
                .iter()
                .map(|v| ((v - max) / params.temperature).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            chosen
        }
    })
}
