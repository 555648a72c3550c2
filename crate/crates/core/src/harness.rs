//! Replicated training experiments and parameter sweeps.
//!
//! One *experiment* trains an agent from scratch and extracts its greedy
//! sequence. An experiment set repeats this with seeds `base_seed + r` until
//! `replications` experiments have produced a feasible sequence; failed
//! experiments count towards `attempts` only, so the reported mean never
//! includes penalty-dominated runs.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, AgentError, EpisodeLog, Hyperparams, Rollout};
use crate::model::{AssemblyProblem, TaskId};
use crate::numfmt::fmt_f64;
use crate::oracle::{self, OracleError};

/// Pairs of (epsilon decay, episodes until the episode reward plateaus).
pub const DECAY_EPISODE_PAIRS: [(f64, f64); 8] = [
    (0.005, 90.0),
    (0.002, 175.0),
    (0.001, 350.0),
    (0.0005, 800.0),
    (0.0002, 1800.0),
    (0.0001, 3000.0),
    (0.00005, 6500.0),
    (0.00003, 12000.0),
];

/// Experiments allowed per requested replication before a set is abandoned.
pub const MAX_ATTEMPT_FACTOR: usize = 10;

const OPTIMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("replications must be at least 1")]
    NoReplications,
    #[error(
        "only {successes} of {attempts} experiments learned a feasible sequence; giving up after {attempts} attempts"
    )]
    TooManyFailures { successes: usize, attempts: usize },
    #[error("unknown hyperparameter axis '{0}'")]
    UnknownAxis(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("power-law fit needs at least two distinct strictly positive x values and positive y values")]
    FitDomain,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: AssemblyProblem,
    pub hyperparams: Hyperparams,
    pub replications: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn new(problem: AssemblyProblem, hyperparams: Hyperparams) -> Self {
        Self { problem, hyperparams, replications: 120, base_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub attempt: usize,
    pub seed: u64,
    pub fail: bool,
    pub optimal: bool,
    pub sequence: Vec<TaskId>,
    pub total_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean of `-total_time` over successful experiments.
    pub mean_normalized_reward: f64,
    pub ci95_halfwidth: f64,
    /// Share of successful experiments that found an optimal sequence.
    pub pct_optimal: f64,
    pub pct_fail: f64,
    pub successful_count: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub metrics: Metrics,
    pub records: Vec<ReplicationRecord>,
    pub optimum: f64,
}

fn run_attempt(spec: &ExperimentSpec, optimum: f64, attempt: usize) -> Result<ReplicationRecord, AgentError> {
    let seed = spec.base_seed.wrapping_add(attempt as u64);
    let trained = agent::train(&spec.problem, &spec.hyperparams, seed)?;
    Ok(match trained.rollout(&spec.problem) {
        Rollout::Success { sequence, total_time } => ReplicationRecord {
            attempt,
            seed,
            fail: false,
            optimal: (total_time - optimum).abs() <= OPTIMAL_TOLERANCE,
            sequence,
            total_time: Some(total_time),
        },
        Rollout::Fail { partial, .. } => {
            ReplicationRecord { attempt, seed, fail: true, optimal: false, sequence: partial, total_time: None }
        }
    })
}

fn run_batch(
    spec: &ExperimentSpec,
    optimum: f64,
    range: std::ops::Range<usize>,
) -> Result<Vec<ReplicationRecord>, AgentError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        range.into_par_iter().map(|a| run_attempt(spec, optimum, a)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(|a| run_attempt(spec, optimum, a)).collect()
    }
}

/// Runs experiments until `replications` of them learn a feasible sequence.
pub fn run_experiment_set(spec: &ExperimentSpec) -> Result<ExperimentResult, HarnessError> {
    if spec.replications == 0 {
        return Err(HarnessError::NoReplications);
    }
    spec.hyperparams.validate(&spec.problem)?;
    let optimum = oracle::solve_dp(&spec.problem)?.min_total_time;
    let max_attempts = MAX_ATTEMPT_FACTOR * spec.replications;

    let mut records: Vec<ReplicationRecord> = Vec::with_capacity(spec.replications);
    let mut successes = 0;
    while successes < spec.replications {
        let start = records.len();
        if start >= max_attempts {
            return Err(HarnessError::TooManyFailures { successes, attempts: start });
        }
        // Launch exactly as many attempts as successes still missing, so the
        // outcome does not depend on scheduling.
        let end = (start + spec.replications - successes).min(max_attempts);
        let batch = run_batch(spec, optimum, start..end)?;
        successes += batch.iter().filter(|r| !r.fail).count();
        records.extend(batch);
    }

    Ok(ExperimentResult { metrics: summarize(&records), records, optimum })
}

pub fn summarize(records: &[ReplicationRecord]) -> Metrics {
    let attempts = records.len();
    let rewards: Vec<f64> = records.iter().filter_map(|r| r.total_time).map(|t| -t).collect();
    let n = rewards.len();
    let mean = if n == 0 { f64::NAN } else { rewards.iter().sum::<f64>() / n as f64 };
    let sd =
        if n > 1 { (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let optimal = records.iter().filter(|r| r.optimal).count();
    Metrics {
        mean_normalized_reward: mean,
        ci95_halfwidth: if n == 0 { f64::NAN } else { 1.96 * sd / (n as f64).sqrt() },
        pct_optimal: if n == 0 { 0.0 } else { 100.0 * optimal as f64 / n as f64 },
        pct_fail: if attempts == 0 { 0.0 } else { 100.0 * (attempts - n) as f64 / attempts as f64 },
        successful_count: n,
        attempts,
    }
}

/// Writes `attempt,seed,fail,optimal,sequence,total_time` rows.
pub fn write_replications_csv<W: Write>(records: &[ReplicationRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "attempt,seed,fail,optimal,sequence,total_time")?;
    for r in records {
        let seq: Vec<String> = r.sequence.iter().map(ToString::to_string).collect();
        let time = r.total_time.map(fmt_f64).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{}", r.attempt, r.seed, r.fail, r.optimal, seq.join("-"), time)?;
    }
    Ok(())
}

/// A hyperparameter a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Axis {
    Alpha,
    Gamma,
    Epsilon,
    EpsilonDecay,
    EpsilonFloor,
    MaxSteps,
    MaxEpisodes,
    RewardShift,
    RewardMultiplier,
    RewardPenalty,
}

impl Axis {
    pub const ALL: [Axis; 10] = [
        Axis::Alpha,
        Axis::Gamma,
        Axis::Epsilon,
        Axis::EpsilonDecay,
        Axis::EpsilonFloor,
        Axis::MaxSteps,
        Axis::MaxEpisodes,
        Axis::RewardShift,
        Axis::RewardMultiplier,
        Axis::RewardPenalty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::Gamma => "gamma",
            Axis::Epsilon => "epsilon",
            Axis::EpsilonDecay => "epsilon_decay",
            Axis::EpsilonFloor => "epsilon_floor",
            Axis::MaxSteps => "max_steps",
            Axis::MaxEpisodes => "max_episodes",
            Axis::RewardShift => "reward_shift",
            Axis::RewardMultiplier => "reward_multiplier",
            Axis::RewardPenalty => "reward_penalty",
        }
    }

    pub fn apply(self, hp: &mut Hyperparams, value: f64) -> Result<(), HarnessError> {
        let count = |v: f64| -> Result<usize, HarnessError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(HarnessError::InvalidSweep(format!("{} needs a non-negative integer, got {v}", self.name())))
            }
        };
        match self {
            Axis::Alpha => hp.alpha = value,
            Axis::Gamma => hp.gamma = value,
            Axis::Epsilon => hp.epsilon = value,
            Axis::EpsilonDecay => hp.epsilon_decay = value,
            Axis::EpsilonFloor => hp.epsilon_floor = value,
            Axis::MaxSteps => hp.max_steps = count(value)?,
            Axis::MaxEpisodes => hp.max_episodes = count(value)?,
            Axis::RewardShift => hp.rewards.shift = value,
            Axis::RewardMultiplier => hp.rewards.multiplier = value,
            Axis::RewardPenalty => hp.rewards.penalty = value,
        }
        Ok(())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_");
        Axis::ALL.into_iter().find(|a| a.name() == norm).ok_or_else(|| HarnessError::UnknownAxis(s.to_string()))
    }
}

impl TryFrom<String> for Axis {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Axis> for String {
    fn from(a: Axis) -> String {
        a.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedAxis {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub paired: Option<PairedAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub paired_value: Option<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub records: Vec<Vec<ReplicationRecord>>,
}

/// One experiment set per axis value, sorted by axis value. Paired values
/// advance in lockstep with the primary ones.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult, HarnessError> {
    if spec.values.is_empty() {
        return Err(HarnessError::InvalidSweep("no axis values".into()));
    }
    if let Some(p) = &spec.paired {
        if p.values.len() != spec.values.len() {
            return Err(HarnessError::InvalidSweep(format!(
                "paired axis has {} values, primary axis has {}",
                p.values.len(),
                spec.values.len()
            )));
        }
        if p.axis == spec.axis {
            return Err(HarnessError::InvalidSweep("paired axis repeats the primary axis".into()));
        }
    }
    let mut cells: Vec<(f64, Option<f64>)> =
        spec.values.iter().enumerate().map(|(i, &v)| (v, spec.paired.as_ref().map(|p| p.values[i]))).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rows = Vec::with_capacity(cells.len());
    let mut records = Vec::with_capacity(cells.len());
    for (value, paired_value) in cells {
        let mut exp = spec.base.clone();
        spec.axis.apply(&mut exp.hyperparams, value)?;
        if let (Some(p), Some(pv)) = (&spec.paired, paired_value) {
            p.axis.apply(&mut exp.hyperparams, pv)?;
        }
        let result = run_experiment_set(&exp)?;
        rows.push(SweepRow { axis_value: value, paired_value, metrics: result.metrics });
        records.push(result.records);
    }
    Ok(SweepResult { rows, records })
}

/// Writes `axis_value,mean,ci95,pct_optimal,pct_fail,attempts` rows (plus a
/// `paired_value` column when present).
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    let paired = rows.iter().any(|r| r.paired_value.is_some());
    if paired {
        writeln!(w, "axis_value,paired_value,mean,ci95,pct_optimal,pct_fail,attempts")?;
    } else {
        writeln!(w, "axis_value,mean,ci95,pct_optimal,pct_fail,attempts")?;
    }
    for r in rows {
        let m = &r.metrics;
        let paired_col = match r.paired_value {
            Some(p) => format!("{},", fmt_f64(p)),
            None if paired => ",".to_string(),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{}{},{},{},{},{}",
            fmt_f64(r.axis_value),
            paired_col,
            fmt_f64(m.mean_normalized_reward),
            fmt_f64(m.ci95_halfwidth),
            fmt_f64(m.pct_optimal),
            fmt_f64(m.pct_fail),
            m.attempts
        )?;
    }
    Ok(())
}

/// First episode at which the trailing moving average of the episode reward
/// comes within 1% of its final value. Runs shorter than `window` use the
/// whole-run average as the final value.
pub fn plateau_episode(logs: &[EpisodeLog], window: usize) -> usize {
    let window = window.max(1);
    if logs.is_empty() {
        return 0;
    }
    let rewards: Vec<f64> = logs.iter().map(|l| l.accumulated_reward).collect();
    let mut moving = Vec::with_capacity(rewards.len());
    let mut sum = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        sum += r;
        if i >= window {
            sum -= rewards[i - window];
        }
        moving.push(sum / (i + 1).min(window) as f64);
    }
    let target = if rewards.len() < window {
        rewards.iter().sum::<f64>() / rewards.len() as f64
    } else {
        *moving.last().expect("non-empty")
    };
    let threshold = target - 0.01 * target.abs();
    moving.iter().position(|&m| m >= threshold).map_or(logs.len() - 1, |i| logs[i].episode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// `y = coefficient * x^exponent`
    pub coefficient: f64,
    pub exponent: f64,
    /// Coefficient of determination in log-log space.
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.coefficient * x.powf(self.exponent)
    }

    /// Inverse of [`RegressionFit::predict`].
    pub fn solve_for_x(&self, y: f64) -> f64 {
        (y / self.coefficient).powf(1.0 / self.exponent)
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RegressionFit, HarnessError> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(HarnessError::FitDomain);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(HarnessError::FitDomain);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RegressionFit { coefficient: intercept.exp(), exponent: slope, r_squared })
}

pub fn decay_episode_fit() -> RegressionFit {
    fit_power_law(&DECAY_EPISODE_PAIRS).expect("fixed data is well-formed")
}

/// Masked training on the tool-changeover problem with a short horizon; the
/// decay is read off the decay/episode power law.
pub fn masked_hyperparams(max_episodes: usize) -> Hyperparams {
    Hyperparams {
        masking: true,
        max_episodes,
        epsilon_decay: decay_episode_fit().solve_for_x(max_episodes as f64),
        ..Hyperparams::scenario_ii_optimal()
    }
}

/// Summary of an experiment set keyed by learned total time.
pub fn outcome_histogram(records: &[ReplicationRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        let key = r.total_time.map_or_else(|| "fail".to_string(), fmt_f64);
        *out.entry(key).or_insert(0) += 1;
    }
    out
}
