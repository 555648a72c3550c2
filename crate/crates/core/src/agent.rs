//! Tabular Q-learning with epsilon-greedy exploration.
//!
//! The Q-table is dense, `state_space_size x N`, zero-initialised. Each agent
//! step applies the update
//!
//! ```text
//! Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))
//! ```
//!
//! with the bootstrap term taken as 0 when `s'` completes the assembly.
//! Exploration decays once per agent step, `eps <- max(floor, eps * (1 - decay))`,
//! and carries over between the episodes of one training run.
//!
//! With `masking` on, the agent only ever considers feasible tasks: for action
//! selection, for the bootstrap maximum and for the greedy rollout. Without it,
//! every task is a candidate and impossible picks are penalised by the
//! environment.

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, RewardParams, StepKind};
use crate::model::{AssemblyProblem, TaskId, TaskSet};
use crate::numfmt::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("no feasible action in non-terminal state {0}")]
    DeadEnd(TaskSet),
    #[error("q-table has {found_states}x{found_actions} entries, problem needs {states}x{actions}")]
    Dimension { states: usize, actions: usize, found_states: usize, found_actions: usize },
    #[error("malformed q-table csv: {0}")]
    Csv(String),
}

/// How exploration shrinks during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecaySchedule {
    /// `eps <- max(floor, eps * (1 - decay))` after every agent step.
    #[default]
    PerStepMultiplicative,
    /// `eps <- max(floor, eps - decay)` after every episode.
    PerEpisodeLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    /// Initial exploration rate.
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub max_steps: usize,
    pub max_episodes: usize,
    pub rewards: RewardParams,
    pub masking: bool,
    pub schedule: DecaySchedule,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::scenario_ii_optimal()
    }
}

impl Hyperparams {
    /// Scenario I base settings: the decay/episode pair 0.0001 / 3000.
    pub fn scenario_i() -> Self {
        Self {
            alpha: 1.0,
            gamma: 1.0,
            epsilon: 0.9,
            epsilon_decay: 0.0001,
            epsilon_floor: 0.01,
            max_steps: 8,
            max_episodes: 3000,
            rewards: RewardParams { multiplier: 20.0, shift: 20.0, penalty: -1_000_000.0 },
            masking: false,
            schedule: DecaySchedule::PerStepMultiplicative,
        }
    }

    /// Best settings found for the tool-changeover problem.
    pub fn scenario_ii_optimal() -> Self {
        Self {
            alpha: 1.0,
            gamma: 1.0,
            epsilon: 0.9,
            epsilon_decay: 0.00005,
            epsilon_floor: 0.01,
            max_steps: 15,
            max_episodes: 6500,
            rewards: RewardParams { multiplier: 13.0, shift: 9.0, penalty: -1_000_000.0 },
            masking: false,
            schedule: DecaySchedule::PerStepMultiplicative,
        }
    }

    pub fn validate(&self, problem: &AssemblyProblem) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidHyperparams(m));
        let unit = |name: &str, v: f64| -> Result<(), AgentError> {
            if !(0.0..=1.0).contains(&v) {
                return Err(AgentError::InvalidHyperparams(format!("{name} must lie in [0, 1], got {v}")));
            }
            Ok(())
        };
        unit("alpha", self.alpha)?;
        unit("gamma", self.gamma)?;
        unit("epsilon", self.epsilon)?;
        unit("epsilon_floor", self.epsilon_floor)?;
        if !self.epsilon_decay.is_finite() || self.epsilon_decay < 0.0 {
            return bad(format!("epsilon_decay must be non-negative, got {}", self.epsilon_decay));
        }
        if self.schedule == DecaySchedule::PerStepMultiplicative && self.epsilon_decay > 1.0 {
            return bad(format!("epsilon_decay must not exceed 1, got {}", self.epsilon_decay));
        }
        if self.max_steps < problem.num_tasks() {
            return bad(format!("max_steps {} is below the task count {}", self.max_steps, problem.num_tasks()));
        }
        let r = &self.rewards;
        if !(r.multiplier.is_finite() && r.multiplier > 0.0) {
            return bad(format!("reward multiplier must be positive, got {}", r.multiplier));
        }
        if !r.shift.is_finite() || !r.penalty.is_finite() {
            return bad("reward shift and penalty must be finite".into());
        }
        Ok(())
    }

    fn decay_after_step(&self, eps: f64) -> f64 {
        match self.schedule {
            DecaySchedule::PerStepMultiplicative => (eps * (1.0 - self.epsilon_decay)).max(self.epsilon_floor),
            DecaySchedule::PerEpisodeLinear => eps,
        }
    }

    fn decay_after_episode(&self, eps: f64) -> f64 {
        match self.schedule {
            DecaySchedule::PerStepMultiplicative => eps,
            DecaySchedule::PerEpisodeLinear => (eps - self.epsilon_decay).max(self.epsilon_floor),
        }
    }
}

/// Dense action-value table. Rows are state ordinals, columns task ids.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self { states, actions, values: vec![0.0; states * actions] }
    }

    pub fn for_problem(problem: &AssemblyProblem) -> Self {
        Self::zeros(env::state_space_size(problem), problem.num_tasks())
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, state: usize, action: TaskId) -> f64 {
        self.values[state * self.actions + action - 1]
    }

    pub fn set(&mut self, state: usize, action: TaskId, value: f64) {
        self.values[state * self.actions + action - 1] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn all_actions(&self) -> TaskSet {
        TaskSet::full(self.actions)
    }

    /// Highest-valued candidate, lowest id on ties.
    pub fn argmax(&self, state: usize, candidates: TaskSet) -> Option<TaskId> {
        let row = self.row(state);
        let mut best: Option<(TaskId, f64)> = None;
        for a in candidates.iter() {
            let v = row[a - 1];
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    pub fn max_over(&self, state: usize, candidates: TaskSet) -> Option<f64> {
        self.argmax(state, candidates).map(|a| self.get(state, a))
    }

    /// Moves `Q(s,a)` towards `reward + gamma * next_value`; returns the new value.
    pub fn update_towards(&mut self, s: usize, a: TaskId, reward: f64, next_value: f64, alpha: f64, gamma: f64) -> f64 {
        let old = self.get(s, a);
        let new = old + alpha * (reward + gamma * next_value - old);
        self.set(s, a, new);
        new
    }

    /// One Bellman update. `next` is `None` when the transition completed the
    /// assembly; otherwise the bootstrap maximum runs over all actions.
    pub fn bellman_update(
        &mut self,
        s: usize,
        a: TaskId,
        reward: f64,
        next: Option<usize>,
        alpha: f64,
        gamma: f64,
    ) -> f64 {
        let next_value = next.and_then(|n| self.max_over(n, self.all_actions())).unwrap_or(0.0);
        self.update_towards(s, a, reward, next_value, alpha, gamma)
    }

    /// Writes `state_ordinal,action,value` rows for every entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "state_ordinal,action,value")?;
        for s in 0..self.states {
            for a in 1..=self.actions {
                writeln!(w, "{s},{a},{}", fmt_f64(self.get(s, a)))?;
            }
        }
        Ok(())
    }

    /// Reads a table written by [`QTable::write_csv`]. Missing entries are zero.
    pub fn read_csv<R: BufRead>(r: R, states: usize, actions: usize) -> Result<Self, AgentError> {
        let mut q = Self::zeros(states, actions);
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "state_ordinal,action,value" => {}
            _ => return Err(AgentError::Csv("missing header".into())),
        }
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| AgentError::Csv(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse_err = || AgentError::Csv(format!("line {}: {line}", i + 2));
            if fields.len() != 3 {
                return Err(parse_err());
            }
            let s: usize = fields[0].trim().parse().map_err(|_| parse_err())?;
            let a: usize = fields[1].trim().parse().map_err(|_| parse_err())?;
            let v: f64 = fields[2].trim().parse().map_err(|_| parse_err())?;
            if s >= states || a == 0 || a > actions {
                return Err(parse_err());
            }
            q.set(s, a, v);
        }
        Ok(q)
    }
}

/// Epsilon-greedy choice among `candidates`: a uniform draw with probability
/// `epsilon`, the greedy argmax (lowest id on ties) otherwise.
pub fn select_action<R: Rng + ?Sized>(
    qtable: &QTable,
    state: usize,
    candidates: TaskSet,
    epsilon: f64,
    rng: &mut R,
) -> Option<TaskId> {
    if candidates.is_empty() {
        return None;
    }
    if rng.gen::<f64>() < epsilon {
        let k = rng.gen_range(0..candidates.len());
        candidates.iter().nth(k)
    } else {
        qtable.argmax(state, candidates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub accumulated_reward: f64,
    pub steps: usize,
    /// Greedy value of the initial state when the episode started.
    pub q0: f64,
    pub epsilon: f64,
    pub impossible_steps: usize,
    pub completed: bool,
}

fn candidates_for(problem: &AssemblyProblem, hp: &Hyperparams, state: &env::EnvState) -> TaskSet {
    if hp.masking {
        problem.feasible_actions(state.done, state.last)
    } else {
        problem.all_tasks()
    }
}

fn ordinal(problem: &AssemblyProblem, state: &env::EnvState) -> usize {
    env::state_ordinal(problem, state).expect("reachable states are encodable")
}

/// Runs one episode, updating `qtable` and `epsilon` in place.
pub fn run_episode<R: Rng + ?Sized>(
    problem: &AssemblyProblem,
    hp: &Hyperparams,
    qtable: &mut QTable,
    rng: &mut R,
    epsilon: &mut f64,
    episode: usize,
) -> Result<EpisodeLog, AgentError> {
    let mut state = env::initial_state(problem);
    let start = ordinal(problem, &state);
    let q0 = qtable.max_over(start, candidates_for(problem, hp, &state)).unwrap_or(0.0);
    let mut log = EpisodeLog {
        episode,
        accumulated_reward: 0.0,
        steps: 0,
        q0,
        epsilon: *epsilon,
        impossible_steps: 0,
        completed: false,
    };

    for _ in 0..hp.max_steps {
        let s = ordinal(problem, &state);
        let candidates = candidates_for(problem, hp, &state);
        let a = select_action(qtable, s, candidates, *epsilon, rng).ok_or(AgentError::DeadEnd(state.done))?;
        let out = env::step(problem, &hp.rewards, &state, a);
        let next_value = if out.terminal {
            0.0
        } else {
            let n = ordinal(problem, &out.next);
            qtable.max_over(n, candidates_for(problem, hp, &out.next)).unwrap_or(0.0)
        };
        qtable.update_towards(s, a, out.reward, next_value, hp.alpha, hp.gamma);
        *epsilon = hp.decay_after_step(*epsilon);

        log.accumulated_reward += out.reward;
        log.steps += 1;
        if out.kind == StepKind::Impossible {
            log.impossible_steps += 1;
        }
        state = out.next;
        if out.terminal {
            log.completed = true;
            break;
        }
    }
    *epsilon = hp.decay_after_episode(*epsilon);
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAgent {
    pub qtable: QTable,
    pub logs: Vec<EpisodeLog>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl TrainedAgent {
    /// Greedy sequence under the agent's own action scope.
    pub fn rollout(&self, problem: &AssemblyProblem) -> Rollout {
        greedy_rollout_with(&self.qtable, problem, self.hyperparams.masking)
    }
}

/// Trains a fresh zero table for `max_episodes` episodes. The RNG stream is
/// ChaCha8 seeded from `seed`, so equal inputs give identical results.
pub fn train(problem: &AssemblyProblem, hp: &Hyperparams, seed: u64) -> Result<TrainedAgent, AgentError> {
    hp.validate(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qtable = QTable::for_problem(problem);
    let mut epsilon = hp.epsilon;
    let mut logs = Vec::with_capacity(hp.max_episodes);
    for episode in 0..hp.max_episodes {
        logs.push(run_episode(problem, hp, &mut qtable, &mut rng, &mut epsilon, episode)?);
    }
    Ok(TrainedAgent { qtable, logs, hyperparams: *hp, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Rollout {
    Success { sequence: Vec<TaskId>, total_time: f64 },
    Fail { partial: Vec<TaskId>, failed_action: Option<TaskId> },
}

impl Rollout {
    pub fn is_fail(&self) -> bool {
        matches!(self, Rollout::Fail { .. })
    }

    pub fn total_time(&self) -> Option<f64> {
        match self {
            Rollout::Success { total_time, .. } => Some(*total_time),
            Rollout::Fail { .. } => None,
        }
    }

    pub fn sequence(&self) -> &[TaskId] {
        match self {
            Rollout::Success { sequence, .. } => sequence,
            Rollout::Fail { partial, .. } => partial,
        }
    }
}

/// Follows `argmax_a Q(s,a)` over all actions from the initial state. Picking
/// an infeasible task at any point is a failure to learn a sequence.
pub fn greedy_rollout(qtable: &QTable, problem: &AssemblyProblem) -> Rollout {
    greedy_rollout_with(qtable, problem, false)
}

/// Greedy rollout; with `masking` the argmax only ranges over feasible tasks.
pub fn greedy_rollout_with(qtable: &QTable, problem: &AssemblyProblem, masking: bool) -> Rollout {
    let mut state = env::initial_state(problem);
    let mut sequence = Vec::with_capacity(problem.num_tasks());
    let no_rewards = RewardParams::default();
    for _ in 0..problem.num_tasks() {
        let feasible = problem.feasible_actions(state.done, state.last);
        let candidates = if masking { feasible } else { problem.all_tasks() };
        let s = ordinal(problem, &state);
        let Some(a) = qtable.argmax(s, candidates) else {
            return Rollout::Fail { partial: sequence, failed_action: None };
        };
        if !feasible.contains(a) {
            return Rollout::Fail { partial: sequence, failed_action: Some(a) };
        }
        sequence.push(a);
        state = env::step(problem, &no_rewards, &state, a).next;
    }
    let total_time = env::sequence_time(problem, &sequence).expect("rollout only takes feasible steps");
    Rollout::Success { sequence, total_time }
}

/// Writes `episode,accumulated_reward,steps,q0,epsilon` rows.
pub fn write_episode_csv<W: Write>(logs: &[EpisodeLog], mut w: W) -> io::Result<()> {
    writeln!(w, "episode,accumulated_reward,steps,q0,epsilon")?;
    for l in logs {
        writeln!(
            w,
            "{},{},{},{},{}",
            l.episode,
            fmt_f64(l.accumulated_reward),
            l.steps,
            fmt_f64(l.q0),
            fmt_f64(l.epsilon)
        )?;
    }
    Ok(())
}
