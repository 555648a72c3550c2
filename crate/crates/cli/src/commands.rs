use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use asmseq::agent::{self, Hyperparams, Rollout};
use asmseq::harness::{self, Axis, ExperimentSpec, PairedAxis, RegressionFit, SweepRow, SweepSpec};
use asmseq::model::{AssemblyProblem, BuiltinScenario, TaskId};
use asmseq::numfmt::fmt_f64;
use asmseq::oracle::{self, milp};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{preset_hyperparams, Common, HyperArgs, Preset};
use crate::error::CliError;

pub fn load_problem(source: &str) -> Result<AssemblyProblem, CliError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return match BuiltinScenario::from_name(name) {
            Some(id) => Ok(asmseq::builtin_scenario(id)),
            None if name == "scenario3" => Err(CliError::Input(
                "scenario3 is not a dataset; use builtin:scenario2 with --masking or --preset scenario3".into(),
            )),
            None => {
                Err(CliError::Input(format!("unknown built-in problem '{name}' (expected scenario1 or scenario2)")))
            }
        };
    }
    let file = File::open(source).map_err(|e| CliError::Input(format!("cannot open problem file {source}: {e}")))?;
    Ok(AssemblyProblem::load(file)?)
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(CliError::output(path))?;
        Ok(Self(path.to_path_buf()))
    }

    fn subdir(&self, name: &str) -> Result<Self, CliError> {
        OutDir::create(&self.0.join(name))
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
        let path = self.0.join(name);
        let file = File::create(&path).map_err(CliError::output(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(CliError::output(&path))
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

fn report_written(out: &OutDir, what: &str) {
    eprintln!("wrote {what} to {}", out.0.display());
}

pub fn enumerate(common: &Common, cap: usize) -> Result<(), CliError> {
    let problem = load_problem(&common.problem)?;
    let records = oracle::enumerate_feasible_capped(&problem, cap)?;
    if records.is_empty() {
        return Err(oracle::OracleError::NoFeasibleSequence.into());
    }
    let dist = oracle::Distribution::from_records(&records, problem.num_tasks());
    let (modal, _) = dist.modal().expect("non-empty distribution");
    let out = OutDir::create(&common.out)?;
    out.write("sequences.csv", |w| oracle::write_sequences_csv(&records, w))?;
    out.write("distribution.csv", |w| dist.write_csv(w))?;
    let summary = json!({
        "problem": problem.name(),
        "count": dist.total(),
        "min": dist.min(),
        "max": dist.max(),
        "modal_value": modal,
        "modal_percent": dist.percent_at(modal),
        "distinct": dist.distinct(),
        "mean_of_distinct": dist.mean_of_distinct(),
        "closed_form_count": oracle::count_linear_extensions_closed_form(&problem).ok().map(|c| c.to_string()),
    });
    out.json("summary.json", &summary)?;
    println!(
        "{} feasible sequences, total time {} to {}",
        dist.total(),
        fmt_f64(dist.min().unwrap()),
        fmt_f64(dist.max().unwrap())
    );
    report_written(&out, "sequences.csv, distribution.csv and summary.json");
    Ok(())
}

pub fn solve(common: &Common, export: bool, sequence_cap: usize) -> Result<(), CliError> {
    let problem = load_problem(&common.problem)?;
    let model = if export { Some(milp::export_milp(&problem)?) } else { None };
    let start = Instant::now();
    let sol = oracle::solve_dp_capped(&problem, sequence_cap)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let out = OutDir::create(&common.out)?;
    let mut doc = json!({
        "problem": problem.name(),
        "min_total_time": sol.min_total_time,
        "makespan": sol.makespan,
        "optimal_count": sol.optimal_count.to_string(),
        "optimal_sequences": sol.optimal_sequences,
        "states_evaluated": sol.states_evaluated,
        "elapsed_ms": elapsed_ms,
    });
    if let Some(m) = &model {
        out.write("model.lp", |w| w.write_all(m.to_lp_string().as_bytes()))?;
        doc["milp"] = milp_stats(m);
    }
    out.json("solution.json", &doc)?;
    println!(
        "minimum total time {} shared by {} sequence(s); {:.2} ms",
        fmt_f64(sol.min_total_time),
        sol.optimal_count,
        elapsed_ms
    );
    report_written(&out, if model.is_some() { "solution.json and model.lp" } else { "solution.json" });
    Ok(())
}

fn milp_stats(m: &milp::MilpModel) -> Value {
    let families: serde_json::Map<String, Value> =
        m.row_families().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    json!({
        "binary_variables": m.binary_variables(),
        "total_variables": m.total_variables(),
        "constraints": m.constraint_count(),
        "constraints_by_family": families,
        "big_m": m.big_m,
    })
}

pub fn export_milp(common: &Common) -> Result<(), CliError> {
    let problem = load_problem(&common.problem)?;
    let m = milp::export_milp(&problem)?;
    let out = OutDir::create(&common.out)?;
    out.write("model.lp", |w| w.write_all(m.to_lp_string().as_bytes()))?;
    out.json("milp.json", &milp_stats(&m))?;
    println!(
        "{} binary, {} total variables, {} constraints",
        m.binary_variables(),
        m.total_variables(),
        m.constraint_count()
    );
    report_written(&out, "model.lp and milp.json");
    Ok(())
}

#[derive(Serialize)]
struct RolloutDoc<'a> {
    problem: &'a str,
    seed: u64,
    fail: bool,
    optimal: bool,
    sequence: &'a [TaskId],
    total_time: Option<f64>,
    failed_action: Option<TaskId>,
    optimum: f64,
    hyperparams: &'a Hyperparams,
}

pub fn train(common: &Common, hyper: &HyperArgs, seed: u64) -> Result<(), CliError> {
    let problem = load_problem(&common.problem)?;
    let hp = hyper.resolve();
    hp.validate(&problem)?;
    let optimum = oracle::solve_dp(&problem)?.min_total_time;
    let trained = agent::train(&problem, &hp, seed)?;
    let rollout = trained.rollout(&problem);
    let out = OutDir::create(&common.out)?;
    out.write("episodes.csv", |w| agent::write_episode_csv(&trained.logs, w))?;
    out.write("qtable.csv", |w| trained.qtable.write_csv(w))?;
    let failed_action = match &rollout {
        Rollout::Fail { failed_action, .. } => *failed_action,
        Rollout::Success { .. } => None,
    };
    let total_time = rollout.total_time();
    let doc = RolloutDoc {
        problem: problem.name(),
        seed,
        fail: rollout.is_fail(),
        optimal: total_time.is_some_and(|t| (t - optimum).abs() <= oracle::TIE_TOLERANCE),
        sequence: rollout.sequence(),
        total_time,
        failed_action,
        optimum,
        hyperparams: &hp,
    };
    out.json("rollout.json", &doc)?;
    match total_time {
        Some(t) => {
            println!("learned {:?} with total time {} (optimum {})", rollout.sequence(), fmt_f64(t), fmt_f64(optimum))
        }
        None => println!("failed to learn a feasible sequence (stopped after {:?})", rollout.sequence()),
    }
    report_written(&out, "episodes.csv, qtable.csv and rollout.json");
    Ok(())
}

/// Sweep spec file contents.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default = "default_problem")]
    pub problem: String,
    #[serde(default)]
    pub preset: Option<PresetName>,
    /// Hyperparameter overrides on top of the preset.
    #[serde(default)]
    pub base: serde_json::Map<String, Value>,
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub paired: Option<PairedAxis>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub base_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Scenario1,
    Scenario2,
    Scenario3,
}

fn default_problem() -> String {
    "builtin:scenario1".into()
}

fn merge(into: &mut Value, overrides: &serde_json::Map<String, Value>) {
    let Value::Object(target) = into else { return };
    for (k, v) in overrides {
        match (target.get_mut(k), v) {
            (Some(slot @ Value::Object(_)), Value::Object(o)) => merge(slot, o),
            _ => {
                target.insert(k.clone(), v.clone());
            }
        }
    }
}

fn sweep_base(file: &SweepFile) -> Result<Hyperparams, CliError> {
    let preset = match file.preset.unwrap_or(PresetName::Scenario2) {
        PresetName::Scenario1 => Preset::Scenario1,
        PresetName::Scenario2 => Preset::Scenario2,
        PresetName::Scenario3 => Preset::Scenario3,
    };
    let episodes = file.base.get("max_episodes").and_then(Value::as_u64).map(|e| e as usize);
    let mut value = serde_json::to_value(preset_hyperparams(preset, episodes)).expect("hyperparameters serialize");
    merge(&mut value, &file.base);
    serde_json::from_value(value).map_err(|e| CliError::Input(format!("invalid base hyperparameters: {e}")))
}

/// Power-law fit of episodes against decay when the sweep pairs the two.
fn decay_fit(spec: &SweepSpec) -> Option<RegressionFit> {
    let paired = spec.paired.as_ref()?;
    let points: Vec<(f64, f64)> = match (spec.axis, paired.axis) {
        (Axis::EpsilonDecay, Axis::MaxEpisodes) => {
            spec.values.iter().copied().zip(paired.values.iter().copied()).collect()
        }
        (Axis::MaxEpisodes, Axis::EpsilonDecay) => {
            paired.values.iter().copied().zip(spec.values.iter().copied()).collect()
        }
        _ => return None,
    };
    harness::fit_power_law(&points).ok()
}

pub fn sweep(
    spec_path: &Path,
    problem: Option<&str>,
    out: &Path,
    seed: Option<u64>,
    replications: Option<usize>,
) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::Input(format!("cannot read sweep spec {}: {e}", spec_path.display())))?;
    let file: SweepFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid sweep spec: {e}")))?;
    if file.values.is_empty() {
        return Err(CliError::Input("sweep spec has no values".into()));
    }
    let problem = load_problem(problem.unwrap_or(&file.problem))?;
    let base = sweep_base(&file)?;
    let mut experiment = ExperimentSpec::new(problem, base);
    if let Some(r) = replications.or(file.replications) {
        experiment.replications = r;
    }
    experiment.base_seed = seed.or(file.base_seed).unwrap_or(0);
    let spec =
        SweepSpec { base: experiment, axis: file.axis, values: file.values.clone(), paired: file.paired.clone() };

    let start = Instant::now();
    let result = harness::sweep(&spec)?;
    let elapsed_s = start.elapsed().as_secs_f64();

    let out = OutDir::create(out)?;
    out.write("sweep.csv", |w| harness::write_sweep_csv(&result.rows, w))?;
    out.write("replications.csv", |w| {
        writeln!(w, "axis_value,attempt,seed,fail,optimal,total_time,sequence")?;
        for (row, records) in result.rows.iter().zip(&result.records) {
            for r in records {
                let seq: Vec<String> = r.sequence.iter().map(ToString::to_string).collect();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(row.axis_value),
                    r.attempt,
                    r.seed,
                    r.fail,
                    r.optimal,
                    r.total_time.map(fmt_f64).unwrap_or_default(),
                    seq.join("-")
                )?;
            }
        }
        Ok(())
    })?;
    write_plot_series(&out.subdir("plot-data")?, &result.rows)?;

    let fit = decay_fit(&spec);
    let summary = json!({
        "problem": spec.base.problem.name(),
        "axis": spec.axis,
        "paired_axis": spec.paired.as_ref().map(|p| p.axis),
        "replications": spec.base.replications,
        "base_seed": spec.base.base_seed,
        "base_hyperparams": spec.base.hyperparams,
        "rows": result.rows,
        "power_law_fit": fit,
        "elapsed_s": elapsed_s,
    });
    out.json("summary.json", &summary)?;
    for row in &result.rows {
        println!(
            "{} = {}: mean {} +/- {}, optimal {}%, fail {}%",
            spec.axis.name(),
            fmt_f64(row.axis_value),
            fmt_f64(row.metrics.mean_normalized_reward),
            fmt_f64(row.metrics.ci95_halfwidth),
            fmt_f64(row.metrics.pct_optimal),
            fmt_f64(row.metrics.pct_fail)
        );
    }
    if let Some(f) = fit {
        println!("episodes = {} * decay^{} (r2 {})", fmt_f64(f.coefficient), fmt_f64(f.exponent), fmt_f64(f.r_squared));
    }
    report_written(&out, "sweep.csv, replications.csv, plot-data/ and summary.json");
    Ok(())
}

/// One `x,y,ci` file per metric.
fn write_plot_series(dir: &OutDir, rows: &[SweepRow]) -> Result<(), CliError> {
    type Pick = fn(&SweepRow) -> (f64, f64);
    let series: [(&str, Pick); 3] = [
        ("mean_reward.csv", |r| (r.metrics.mean_normalized_reward, r.metrics.ci95_halfwidth)),
        ("pct_optimal.csv", |r| (r.metrics.pct_optimal, 0.0)),
        ("pct_fail.csv", |r| (r.metrics.pct_fail, 0.0)),
    ];
    for (name, pick) in series {
        dir.write(name, |w| {
            writeln!(w, "x,y,ci")?;
            for r in rows {
                let (y, ci) = pick(r);
                writeln!(w, "{},{},{}", fmt_f64(r.axis_value), fmt_f64(y), fmt_f64(ci))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn report(
    common: &Common,
    hyper: &HyperArgs,
    seed: u64,
    window: usize,
    replications: Option<usize>,
) -> Result<(), CliError> {
    if window == 0 {
        return Err(CliError::Input("--window must be at least 1".into()));
    }
    let problem = load_problem(&common.problem)?;
    let hp = hyper.resolve();
    hp.validate(&problem)?;
    let out = OutDir::create(&common.out)?;
    let plot = out.subdir("plot-data")?;

    let sol = oracle::solve_dp(&problem)?;
    let dist = oracle::distribution(&problem).ok();
    if let Some(d) = &dist {
        let r = hp.rewards;
        let n = problem.num_tasks() as f64;
        plot.write("distribution.csv", |w| {
            writeln!(w, "total_time,reward,count,percent")?;
            for (t, c) in d.entries() {
                let reward = r.multiplier * (n * r.shift - t);
                writeln!(w, "{},{},{},{}", fmt_f64(t), fmt_f64(reward), c, fmt_f64(d.percent_at(t)))?;
            }
            Ok(())
        })?;
    }

    let trained = agent::train(&problem, &hp, seed)?;
    let plateau = harness::plateau_episode(&trained.logs, window);
    plot.write("learning_curve.csv", |w| {
        writeln!(w, "episode,accumulated_reward,moving_average,q0,epsilon")?;
        let mut sum = 0.0;
        for (i, l) in trained.logs.iter().enumerate() {
            sum += l.accumulated_reward;
            if i >= window {
                sum -= trained.logs[i - window].accumulated_reward;
            }
            let avg = sum / (i + 1).min(window) as f64;
            writeln!(
                w,
                "{},{},{},{},{}",
                l.episode,
                fmt_f64(l.accumulated_reward),
                fmt_f64(avg),
                fmt_f64(l.q0),
                fmt_f64(l.epsilon)
            )?;
        }
        Ok(())
    })?;

    let fit = harness::decay_episode_fit();
    plot.write("decay_fit.csv", |w| {
        writeln!(w, "epsilon_decay,max_episodes,fitted_episodes")?;
        for (x, y) in harness::DECAY_EPISODE_PAIRS {
            writeln!(w, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(fit.predict(x)))?;
        }
        Ok(())
    })?;

    let metrics = match replications {
        Some(n) => {
            let mut spec = ExperimentSpec::new(problem.clone(), hp);
            spec.replications = n;
            spec.base_seed = seed;
            Some(harness::run_experiment_set(&spec)?.metrics)
        }
        None => None,
    };

    let rollout = trained.rollout(&problem);
    let summary = json!({
        "problem": problem.name(),
        "optimum": sol.min_total_time,
        "optimal_count": sol.optimal_count.to_string(),
        "distribution": dist.as_ref().map(|d| json!({
            "count": d.total(),
            "min": d.min(),
            "max": d.max(),
            "distinct": d.distinct(),
            "modal": d.modal().map(|(v, c)| json!({ "total_time": v, "count": c, "percent": d.percent_at(v) })),
        })),
        "seed": seed,
        "hyperparams": hp,
        "plateau_episode": plateau,
        "plateau_window": window,
        "rollout": rollout,
        "decay_fit": fit,
        "metrics": metrics,
    });
    out.json("summary.json", &summary)?;
    println!("plateau at episode {plateau}; rollout {:?}", rollout.total_time().map(fmt_f64));
    report_written(&out, "plot-data/ and summary.json");
    Ok(())
}
