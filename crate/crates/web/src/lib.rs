//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export takes and returns JSON text. The `*_json` functions hold the
//! logic and are plain Rust so they can be tested natively.

use asmseq::agent::{self, Hyperparams};
use asmseq::harness::{self, ExperimentSpec};
use asmseq::model::{AssemblyProblem, BuiltinScenario};
use asmseq::oracle;
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Learning curves are thinned to at most this many points.
const CURVE_POINTS: usize = 600;

fn problem(source: &str) -> Result<AssemblyProblem, String> {
    match BuiltinScenario::from_name(source.trim()) {
        Some(id) => Ok(asmseq::builtin_scenario(id)),
        None => AssemblyProblem::from_json_str(source).map_err(|e| e.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    preset: Option<String>,
    masking: Option<bool>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    epsilon_decay: Option<f64>,
    max_steps: Option<usize>,
    max_episodes: Option<usize>,
    reward_shift: Option<f64>,
    reward_multiplier: Option<f64>,
    reward_penalty: Option<f64>,
}

fn hyperparams(params: &str) -> Result<Hyperparams, String> {
    let p: Params = if params.trim().is_empty() {
        Params::default()
    } else {
        serde_json::from_str(params).map_err(|e| e.to_string())?
    };
    let mut hp = match p.preset.as_deref().unwrap_or("scenario2") {
        "scenario1" => Hyperparams::scenario_i(),
        "scenario2" => Hyperparams::scenario_ii_optimal(),
        "scenario3" => harness::masked_hyperparams(p.max_episodes.unwrap_or(780)),
        other => return Err(format!("unknown preset '{other}'")),
    };
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut hp.alpha, p.alpha);
    set(&mut hp.gamma, p.gamma);
    set(&mut hp.epsilon, p.epsilon);
    set(&mut hp.epsilon_decay, p.epsilon_decay);
    set(&mut hp.rewards.shift, p.reward_shift);
    set(&mut hp.rewards.multiplier, p.reward_multiplier);
    set(&mut hp.rewards.penalty, p.reward_penalty);
    hp.max_steps = p.max_steps.unwrap_or(hp.max_steps);
    hp.max_episodes = p.max_episodes.unwrap_or(hp.max_episodes);
    hp.masking = p.masking.unwrap_or(hp.masking);
    Ok(hp)
}

/// Total-time distribution over all feasible sequences plus the exact optimum.
pub fn distribution_json(source: &str) -> Result<String, String> {
    let p = problem(source)?;
    let d = oracle::distribution(&p).map_err(|e| e.to_string())?;
    let sol = oracle::solve_dp(&p).map_err(|e| e.to_string())?;
    let bins: Vec<Value> = d.entries().into_iter().map(|(t, c)| json!([t, c, d.percent_at(t)])).collect();
    Ok(json!({
        "problem": p.name(),
        "count": d.total(),
        "bins": bins,
        "distinct": d.distinct(),
        "modal": d.modal().map(|(t, _)| t),
        "optimum": sol.min_total_time,
        "optimal_count": sol.optimal_count.to_string(),
        "optimal_sequences": sol.optimal_sequences,
    })
    .to_string())
}

/// Trains one agent; returns a thinned learning curve and the greedy rollout.
pub fn train_json(source: &str, params: &str, seed: u64) -> Result<String, String> {
    let p = problem(source)?;
    let hp = hyperparams(params)?;
    let optimum = oracle::solve_dp(&p).map_err(|e| e.to_string())?.min_total_time;
    let trained = agent::train(&p, &hp, seed).map_err(|e| e.to_string())?;
    let stride = trained.logs.len().div_ceil(CURVE_POINTS).max(1);
    let curve: Vec<Value> = trained
        .logs
        .chunks(stride)
        .map(|chunk| {
            let mean = chunk.iter().map(|l| l.accumulated_reward).sum::<f64>() / chunk.len() as f64;
            let last = chunk.last().expect("chunks are non-empty");
            json!([last.episode, mean, last.q0, last.epsilon])
        })
        .collect();
    let rollout = trained.rollout(&p);
    let optimal = rollout.total_time().is_some_and(|t| (t - optimum).abs() <= oracle::TIE_TOLERANCE);
    Ok(json!({
        "curve": curve,
        "plateau": harness::plateau_episode(&trained.logs, 100),
        "rollout": rollout,
        "optimal": optimal,
        "optimum": optimum,
        "hyperparams": hp,
    })
    .to_string())
}

/// Runs a replicated experiment set and reports its metrics and outcomes.
pub fn experiment_json(source: &str, params: &str, replications: usize, seed: u64) -> Result<String, String> {
    let p = problem(source)?;
    let hp = hyperparams(params)?;
    let mut spec = ExperimentSpec::new(p, hp);
    spec.replications = replications;
    spec.base_seed = seed;
    let result = harness::run_experiment_set(&spec).map_err(|e| e.to_string())?;
    Ok(json!({
        "metrics": result.metrics,
        "outcomes": harness::outcome_histogram(&result.records),
        "optimum": result.optimum,
    })
    .to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn distribution(problem: &str) -> Result<String, JsValue> {
    to_js(distribution_json(problem))
}

#[wasm_bindgen]
pub fn train(problem: &str, params: &str, seed: u32) -> Result<String, JsValue> {
    to_js(train_json(problem, params, seed.into()))
}

#[wasm_bindgen]
pub fn experiment(problem: &str, params: &str, replications: u32, seed: u32) -> Result<String, JsValue> {
    to_js(experiment_json(problem, params, replications as usize, seed.into()))
}
