//! Exact ground truth for small assembly problems.
//!
//! Two independent routes give the optimum: exhaustive enumeration of every
//! feasible sequence, and a memoised dynamic program over `(done, tool)`
//! states that also counts the optimal sequences. [`milp`] exports the
//! equivalent assignment model in LP format for external solvers.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, EnvState};
use crate::model::{AssemblyProblem, TaskId, TaskSet, Tool, MAX_TASKS};
use crate::numfmt::fmt_f64;

pub mod milp;

pub use milp::{export_milp, MilpModel};

/// Enumeration refuses larger problems unless given an explicit cap.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;
/// Default number of optimal sequences listed by [`solve_dp`].
pub const DEFAULT_SEQUENCE_CAP: usize = 1000;

/// Totals closer than this count as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{tasks} tasks exceeds the enumeration cap of {cap}; use the dynamic program (solve) instead")]
    CapExceeded { tasks: usize, cap: usize },
    #[error("{tasks} tasks exceeds the dynamic program limit of {MAX_TASKS}")]
    TooLarge { tasks: usize },
    #[error("problem has no feasible sequence")]
    NoFeasibleSequence,
    #[error("the assignment model has no tool dimension; disable tool changeovers to export it")]
    ToolsUnsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence: Vec<TaskId>,
    pub total_time: f64,
}

/// Every feasible sequence with its exact total time, in lexicographic order.
pub fn enumerate_feasible(problem: &AssemblyProblem) -> Result<Vec<SequenceRecord>, OracleError> {
    enumerate_feasible_capped(problem, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_feasible_capped(problem: &AssemblyProblem, cap: usize) -> Result<Vec<SequenceRecord>, OracleError> {
    let n = problem.num_tasks();
    if n > cap {
        return Err(OracleError::CapExceeded { tasks: n, cap });
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    extend(problem, env::initial_state(problem), 0.0, &mut prefix, &mut out);
    Ok(out)
}

fn extend(
    problem: &AssemblyProblem,
    state: EnvState,
    elapsed: f64,
    prefix: &mut Vec<TaskId>,
    out: &mut Vec<SequenceRecord>,
) {
    if prefix.len() == problem.num_tasks() {
        out.push(SequenceRecord { sequence: prefix.clone(), total_time: elapsed });
        return;
    }
    for a in problem.feasible_actions(state.done, state.last).iter() {
        let d = env::duration_unchecked(problem, &state, a);
        let next = env::step(problem, &env::RewardParams::default(), &state, a).next;
        prefix.push(a);
        extend(problem, next, elapsed + d, prefix, out);
        prefix.pop();
    }
}

/// The precedence relation is not a forest after transitive reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("precedence relation is not a forest")]
pub struct NotAForest;

/// Number of linear extensions of a forest-shaped precedence order,
/// `n! / prod(subtree sizes)`. Forbidden pairs are not taken into account.
pub fn count_linear_extensions_closed_form(problem: &AssemblyProblem) -> Result<u128, NotAForest> {
    let n = problem.num_tasks();
    let ancestors: Vec<TaskSet> = (1..=n).map(|t| ancestors_of(problem, t)).collect();
    let mut parent: Vec<Option<TaskId>> = vec![None; n];
    for t in 1..=n {
        let direct = problem.prerequisites(t);
        let mut immediate = direct.iter().filter(|&p| !direct.iter().any(|q| q != p && ancestors[q - 1].contains(p)));
        parent[t - 1] = immediate.next();
        if immediate.next().is_some() {
            return Err(NotAForest);
        }
    }
    let factorial: u128 = (1..=n as u128).product();
    let denominator: u128 =
        (1..=n).map(|v| 1 + (1..=n).filter(|&t| ancestors[t - 1].contains(v)).count() as u128).product();
    Ok(factorial / denominator)
}

fn ancestors_of(problem: &AssemblyProblem, task: TaskId) -> TaskSet {
    let mut acc = TaskSet::EMPTY;
    let mut stack: Vec<TaskId> = problem.prerequisites(task).iter().collect();
    while let Some(t) = stack.pop() {
        if !acc.contains(t) {
            acc = acc.with(t);
            stack.extend(problem.prerequisites(t).iter());
        }
    }
    acc
}

/// Histogram of total times over all feasible sequences. Keys are rounded to
/// 1e-6 time units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Distribution {
    bins: BTreeMap<i64, u64>,
    total: u64,
    tasks: usize,
}

fn bin_key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

fn key_value(k: i64) -> f64 {
    k as f64 / 1e6
}

impl Distribution {
    pub fn from_records(records: &[SequenceRecord], tasks: usize) -> Self {
        let mut bins = BTreeMap::new();
        for r in records {
            *bins.entry(bin_key(r.total_time)).or_insert(0) += 1;
        }
        Self { bins, total: records.len() as u64, tasks }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `(total_time, count)` pairs in ascending time order.
    pub fn entries(&self) -> Vec<(f64, u64)> {
        self.bins.iter().map(|(&k, &c)| (key_value(k), c)).collect()
    }

    pub fn count_at(&self, total_time: f64) -> u64 {
        self.bins.get(&bin_key(total_time)).copied().unwrap_or(0)
    }

    pub fn percent_at(&self, total_time: f64) -> f64 {
        100.0 * self.count_at(total_time) as f64 / self.total as f64
    }

    pub fn distinct(&self) -> usize {
        self.bins.len()
    }

    pub fn min(&self) -> Option<f64> {
        self.bins.keys().next().map(|&k| key_value(k))
    }

    pub fn max(&self) -> Option<f64> {
        self.bins.keys().next_back().map(|&k| key_value(k))
    }

    /// Most frequent total time (the shortest one on ties) and its count.
    pub fn modal(&self) -> Option<(f64, u64)> {
        let mut best: Option<(i64, u64)> = None;
        for (&k, &c) in &self.bins {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((k, c));
            }
        }
        best.map(|(k, c)| (key_value(k), c))
    }

    pub fn mean_of_distinct(&self) -> Option<f64> {
        if self.bins.is_empty() {
            return None;
        }
        Some(self.bins.keys().map(|&k| key_value(k)).sum::<f64>() / self.bins.len() as f64)
    }

    /// Histogram axis: every multiple of `step` from `min` to `max`, occupied or not.
    pub fn grid(&self, step: f64) -> Vec<f64> {
        let (Some(lo), Some(hi)) = (self.min(), self.max()) else {
            return Vec::new();
        };
        if step.is_nan() || step <= 0.0 {
            return vec![lo];
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    /// Accumulated-reward view: a total time `v` maps to `multiplier * (N * shift - v)`.
    pub fn reward_view(&self, multiplier: f64, shift: f64) -> Vec<(f64, u64)> {
        let n = self.tasks as f64;
        let mut out: Vec<(f64, u64)> =
            self.entries().into_iter().map(|(v, c)| (multiplier * (n * shift - v), c)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Writes `total_time,count,percent` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "total_time,count,percent")?;
        for (v, c) in self.entries() {
            writeln!(w, "{},{},{}", fmt_f64(v), c, fmt_f64(100.0 * c as f64 / self.total as f64))?;
        }
        Ok(())
    }
}

pub fn distribution(problem: &AssemblyProblem) -> Result<Distribution, OracleError> {
    let records = enumerate_feasible(problem)?;
    Ok(Distribution::from_records(&records, problem.num_tasks()))
}

/// Writes `rank,sequence,total_time` rows, the sequence joined with `-`.
pub fn write_sequences_csv<W: Write>(records: &[SequenceRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "rank,sequence,total_time")?;
    for (i, r) in records.iter().enumerate() {
        let seq: Vec<String> = r.sequence.iter().map(ToString::to_string).collect();
        writeln!(w, "{},{},{}", i + 1, seq.join("-"), fmt_f64(r.total_time))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub min_total_time: f64,
    /// Makespan of an optimal sequence; equals `min_total_time` on a single resource.
    pub makespan: f64,
    pub optimal_count: u128,
    pub optimal_sequences: Vec<Vec<TaskId>>,
    pub states_evaluated: usize,
}

type DpKey = (u32, Tool, Option<TaskId>);

struct Dp<'a> {
    problem: &'a AssemblyProblem,
    memo: HashMap<DpKey, (f64, u128)>,
}

impl Dp<'_> {
    fn key(&self, s: &EnvState) -> DpKey {
        let last = if self.problem.has_forbidden_pairs() { s.last } else { None };
        (s.done.0, s.tool, last)
    }

    fn next(&self, s: &EnvState, a: TaskId) -> EnvState {
        env::step(self.problem, &env::RewardParams::default(), s, a).next
    }

    /// Minimal remaining time from `s` and the number of sequences attaining it.
    fn best(&mut self, s: &EnvState) -> (f64, u128) {
        if env::is_terminal(self.problem, s) {
            return (0.0, 1);
        }
        let key = self.key(s);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut best = (f64::INFINITY, 0u128);
        for a in self.problem.feasible_actions(s.done, s.last).iter() {
            let d = env::duration_unchecked(self.problem, s, a);
            let (rest, count) = self.best(&self.next(s, a));
            if count == 0 {
                continue;
            }
            let total = d + rest;
            if total < best.0 - TIE_TOLERANCE {
                best = (total, count);
            } else if (total - best.0).abs() <= TIE_TOLERANCE {
                best.1 += count;
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn collect(&mut self, s: &EnvState, prefix: &mut Vec<TaskId>, out: &mut Vec<Vec<TaskId>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if env::is_terminal(self.problem, s) {
            out.push(prefix.clone());
            return;
        }
        let (target, _) = self.best(s);
        for a in self.problem.feasible_actions(s.done, s.last).iter() {
            let d = env::duration_unchecked(self.problem, s, a);
            let next = self.next(s, a);
            let (rest, count) = self.best(&next);
            if count > 0 && (d + rest - target).abs() <= TIE_TOLERANCE {
                prefix.push(a);
                self.collect(&next, prefix, out, cap);
                prefix.pop();
            }
        }
    }
}

/// Minimal total time by dynamic programming over reachable states.
pub fn solve_dp(problem: &AssemblyProblem) -> Result<ExactSolution, OracleError> {
    solve_dp_capped(problem, DEFAULT_SEQUENCE_CAP)
}

pub fn solve_dp_capped(problem: &AssemblyProblem, sequence_cap: usize) -> Result<ExactSolution, OracleError> {
    if problem.num_tasks() > MAX_TASKS {
        return Err(OracleError::TooLarge { tasks: problem.num_tasks() });
    }
    let mut dp = Dp { problem, memo: HashMap::new() };
    let start = env::initial_state(problem);
    let (min_total_time, optimal_count) = dp.best(&start);
    if optimal_count == 0 {
        return Err(OracleError::NoFeasibleSequence);
    }
    let mut optimal_sequences = Vec::new();
    dp.collect(&start, &mut Vec::new(), &mut optimal_sequences, sequence_cap);
    Ok(ExactSolution {
        min_total_time,
        makespan: min_total_time,
        optimal_count,
        optimal_sequences,
        states_evaluated: dp.memo.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_scenario, BuiltinScenario, DeltaMatrix, ForbiddenPairs, PrecedenceSet, Task, ToolConfig,
    };

    fn s1() -> AssemblyProblem {
        builtin_scenario(BuiltinScenario::ScenarioI)
    }

    fn s2() -> AssemblyProblem {
        builtin_scenario(BuiltinScenario::ScenarioII)
    }

    fn free_problem(n: usize, precedence: Vec<(TaskId, TaskId)>) -> AssemblyProblem {
        AssemblyProblem::new(
            "free",
            (1..=n).map(|id| Task { id, avg_time: 1.0 + id as f64, tool: Tool::None }).collect(),
            DeltaMatrix::zeros(n),
            PrecedenceSet { pairs: precedence },
            ForbiddenPairs::default(),
            ToolConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn scenario1_enumeration() {
        let recs = enumerate_feasible(&s1()).unwrap();
        assert_eq!(recs.len(), 3360);
        assert_eq!(count_linear_extensions_closed_form(&s1()), Ok(3360));
    }

    #[test]
    fn unconstrained_enumeration() {
        let p = free_problem(8, vec![]);
        assert_eq!(enumerate_feasible(&p).unwrap().len(), 40320);
        assert_eq!(count_linear_extensions_closed_form(&p), Ok(40320));
    }

    #[test]
    fn diamond_is_not_a_forest() {
        let p = free_problem(4, vec![(2, 1), (3, 1), (4, 2), (4, 3)]);
        assert_eq!(count_linear_extensions_closed_form(&p), Err(NotAForest));
        // 1, then 2 and 3 in either order, then 4.
        assert_eq!(enumerate_feasible(&p).unwrap().len(), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let p = free_problem(4, vec![]);
        assert_eq!(enumerate_feasible_capped(&p, 3), Err(OracleError::CapExceeded { tasks: 4, cap: 3 }));
    }

    #[test]
    fn scenario1_distribution() {
        let d = distribution(&s1()).unwrap();
        assert_eq!(d.total(), 3360);
        let (modal, _) = d.modal().unwrap();
        assert_eq!(modal, 69.5);
        assert!((d.percent_at(69.5) - 18.4).abs() <= 0.1, "{}", d.percent_at(69.5));
        assert_eq!(d.count_at(65.0), 50);
        assert_eq!(d.min(), Some(65.0));
    }

    #[test]
    fn scenario2_distribution() {
        let d = distribution(&s2()).unwrap();
        // Every half unit from 64 to 82 except 81.
        assert_eq!(d.distinct(), 36);
        assert_eq!(d.count_at(81.0), 0);
        assert_eq!((d.min(), d.max()), (Some(64.0), Some(82.0)));
        let grid = d.grid(0.5);
        assert_eq!(grid.len(), 37);
        assert!((grid.iter().sum::<f64>() / 37.0 - 73.0).abs() < 1e-9);
        let view = d.reward_view(1.0, 0.0);
        assert_eq!(view.last().unwrap().0, -64.0);
    }

    #[test]
    fn dp_scenario1() {
        let sol = solve_dp(&s1()).unwrap();
        assert_eq!(sol.min_total_time, 65.0);
        assert_eq!(sol.optimal_count, 50);
        assert_eq!(sol.optimal_sequences.len(), 50);
        assert!(sol.optimal_sequences.contains(&vec![1, 8, 4, 7, 5, 2, 6, 3]));
    }

    #[test]
    fn dp_scenario2() {
        let sol = solve_dp(&s2()).unwrap();
        assert_eq!(sol.min_total_time, 64.0);
        assert_eq!(sol.optimal_count, 2);
        assert_eq!(sol.optimal_sequences, vec![vec![7, 1, 8, 2, 4, 5, 6, 3], vec![7, 8, 1, 2, 4, 5, 6, 3]]);
    }

    #[test]
    fn dp_single_task() {
        let p = AssemblyProblem::new(
            "one",
            vec![Task { id: 1, avg_time: 5.0, tool: Tool::None }],
            DeltaMatrix::zeros(1),
            PrecedenceSet::default(),
            ForbiddenPairs::default(),
            ToolConfig::default(),
        )
        .unwrap();
        let sol = solve_dp(&p).unwrap();
        assert_eq!((sol.min_total_time, sol.optimal_count), (5.0, 1));
    }

    #[test]
    fn dp_sequence_cap() {
        let sol = solve_dp_capped(&s1(), 3).unwrap();
        assert_eq!(sol.optimal_count, 50);
        assert_eq!(sol.optimal_sequences.len(), 3);
    }

    #[test]
    fn forbidden_pairs_prune_sequences() {
        let mut doc = s1().to_document();
        // 1 may never be directly followed by 8.
        doc.forbidden = vec![[1, 8]];
        let p = AssemblyProblem::from_document(doc).unwrap();
        let recs = enumerate_feasible(&p).unwrap();
        assert!(recs.iter().all(|r| !r.sequence.windows(2).any(|w| w == [1, 8])));
        assert!(recs.len() < 3360);
        let sol = solve_dp(&p).unwrap();
        let min = recs.iter().map(|r| r.total_time).fold(f64::INFINITY, f64::min);
        assert_eq!(sol.min_total_time, min);
        let at_min = recs.iter().filter(|r| (r.total_time - min).abs() < 1e-9).count();
        assert_eq!(sol.optimal_count, at_min as u128);
    }

    #[test]
    fn csv_outputs_have_headers() {
        let d = distribution(&s1()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("total_time,count,percent\n"));
        assert!(text.contains("\n65.0000000,50,"));
    }
}
