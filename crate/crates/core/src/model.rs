//! Assembly problem data model.
//!
//! An [`AssemblyProblem`] is a set of tasks with average durations, a matrix of
//! duration adjustments that apply once other tasks are complete, a precedence
//! relation, an optional set of immediately-forbidden successions and a tool
//! changeover configuration. Problems are immutable once built; every
//! constructor runs the full validation pass.
//!
//! Problems are exchanged as JSON documents:
//!
//! ```json
//! {
//!   "name": "toy",
//!   "tasks": [{ "id": 1, "avg_time": 5, "tool": "none" }],
//!   "deltas": [[0]],
//!   "precedence": [],
//!   "forbidden": [],
//!   "tool_config": { "enabled": false, "changeover_time": 0 }
//! }
//! ```
//!
//! Task ids are 1-based. `precedence` holds `[task, prerequisite]` pairs,
//! `forbidden` holds `[task, successor]` pairs, and `deltas[i-1][j-1]` is the
//! change in task `j`'s duration once task `i` is done.

use std::collections::VecDeque;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest problem the bitmask encodings support.
pub const MAX_TASKS: usize = 24;

/// 1-based task identifier.
pub type TaskId = usize;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("syntax error in problem document: {0}")]
    Syntax(#[source] serde_json::Error),
    #[error("schema error in problem document: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error reading problem: {0}")]
    Io(#[from] std::io::Error),
}

impl ProblemError {
    fn from_json(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match err.classify() {
            Category::Syntax | Category::Eof => ProblemError::Syntax(err),
            Category::Io => ProblemError::Io(err.into()),
            Category::Data => ProblemError::Schema(err.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ProblemError {
    ProblemError::Validation(msg.into())
}

/// Fastening tool a task needs. The discriminant is the tool index used in the
/// state encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    #[default]
    None = 0,
    Screwdriver = 1,
    #[serde(rename = "nutdriver")]
    NutDriver = 2,
}

impl Tool {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_some(self) -> bool {
        self != Tool::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub avg_time: f64,
    #[serde(default)]
    pub tool: Tool,
}

/// Set of tasks stored as a bitmask: task `n` occupies bit `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TaskSet(pub u32);

impl TaskSet {
    pub const EMPTY: TaskSet = TaskSet(0);

    pub fn full(n: usize) -> Self {
        if n >= 32 {
            TaskSet(u32::MAX)
        } else {
            TaskSet((1u32 << n) - 1)
        }
    }

    pub fn bit(task: TaskId) -> u32 {
        1u32 << (task - 1)
    }

    pub fn contains(self, task: TaskId) -> bool {
        self.0 & Self::bit(task) != 0
    }

    #[must_use]
    pub fn with(self, task: TaskId) -> Self {
        TaskSet(self.0 | Self::bit(task))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset_of(self, other: TaskSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Tasks in ascending id order.
    pub fn iter(self) -> impl Iterator<Item = TaskId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros() as usize + 1;
            bits &= bits - 1;
            Some(t)
        })
    }
}

impl FromIterator<TaskId> for TaskSet {
    fn from_iter<I: IntoIterator<Item = TaskId>>(iter: I) -> Self {
        iter.into_iter().fold(TaskSet::EMPTY, TaskSet::with)
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

/// Row-major `N x N` matrix; `get(i, j)` is the change in task `j`'s duration
/// once task `i` is done.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DeltaMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProblemError> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ProblemError::Schema(format!(
                    "deltas row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { n, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, done: TaskId, task: TaskId) -> f64 {
        self.values[(done - 1) * self.n + (task - 1)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// `(task, prerequisite)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrecedenceSet {
    pub pairs: Vec<(TaskId, TaskId)>,
}

/// `(task, successor)` pairs: `successor` may not be executed immediately
/// after `task`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForbiddenPairs {
    pub pairs: Vec<(TaskId, TaskId)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub enabled: bool,
    pub changeover_time: f64,
    #[serde(default)]
    pub initial_tool: Tool,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self { enabled: false, changeover_time: 0.0, initial_tool: Tool::None }
    }
}

/// Serialized form of a problem. Converting it into an [`AssemblyProblem`]
/// validates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub name: String,
    pub tasks: Vec<Task>,
    pub deltas: Vec<Vec<f64>>,
    #[serde(default)]
    pub precedence: Vec<[TaskId; 2]>,
    #[serde(default)]
    pub forbidden: Vec<[TaskId; 2]>,
    #[serde(default)]
    pub tool_config: ToolConfig,
    /// Raw duration measurements, one row per repetition. Informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationWarning {
    /// The forbidden pair can never occur because `successor` must precede `task`.
    RedundantForbiddenPair { task: TaskId, successor: TaskId },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::RedundantForbiddenPair { task, successor } => {
                write!(f, "forbidden pair ({task}, {successor}) is already impossible: {successor} must precede {task}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinScenario {
    ScenarioI,
    ScenarioII,
}

impl BuiltinScenario {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinScenario::ScenarioI => "scenario1",
            BuiltinScenario::ScenarioII => "scenario2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "scenario1" => Some(BuiltinScenario::ScenarioI),
            "scenario2" => Some(BuiltinScenario::ScenarioII),
            _ => None,
        }
    }

    pub fn document_json(self) -> &'static str {
        match self {
            BuiltinScenario::ScenarioI => include_str!("../data/scenario1.json"),
            BuiltinScenario::ScenarioII => include_str!("../data/scenario2.json"),
        }
    }
}

pub fn builtin_scenario(id: BuiltinScenario) -> AssemblyProblem {
    AssemblyProblem::from_json_str(id.document_json()).expect("built-in problem is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyProblem {
    name: String,
    tasks: Vec<Task>,
    deltas: DeltaMatrix,
    precedence: PrecedenceSet,
    forbidden: ForbiddenPairs,
    tool_config: ToolConfig,
    measurements: Option<Vec<Vec<f64>>>,
    prereqs: Vec<TaskSet>,
    forbidden_after: Vec<TaskSet>,
    warnings: Vec<ValidationWarning>,
}

impl AssemblyProblem {
    pub fn new(
        name: impl Into<String>,
        tasks: Vec<Task>,
        deltas: DeltaMatrix,
        precedence: PrecedenceSet,
        forbidden: ForbiddenPairs,
        tool_config: ToolConfig,
    ) -> Result<Self, ProblemError> {
        let mut tasks = tasks;
        tasks.sort_by_key(|t| t.id);
        let n = tasks.len();
        if n == 0 {
            return Err(invalid("problem has no tasks"));
        }
        if n > MAX_TASKS {
            return Err(invalid(format!("{n} tasks exceeds the supported maximum of {MAX_TASKS}")));
        }
        for (i, t) in tasks.iter().enumerate() {
            if t.id != i + 1 {
                return Err(invalid(format!(
                    "task ids must be exactly 1..{n} without duplicates (found id {} at position {})",
                    t.id,
                    i + 1
                )));
            }
            if !t.avg_time.is_finite() {
                return Err(invalid(format!("task {} has a non-finite duration", t.id)));
            }
            if t.avg_time < 0.0 {
                return Err(invalid(format!("negative duration for task {}: {}", t.id, t.avg_time)));
            }
        }
        if deltas.dim() != n {
            return Err(ProblemError::Schema(format!("deltas is {}x{0}, expected {n}x{n}", deltas.dim())));
        }
        for i in 1..=n {
            for j in 1..=n {
                let d = deltas.get(i, j);
                if !d.is_finite() {
                    return Err(invalid(format!("delta[{i}][{j}] is not finite")));
                }
                if i == j && d != 0.0 {
                    return Err(invalid(format!("diagonal delta[{i}][{i}] must be 0, found {d}")));
                }
            }
        }

        let check_pair = |kind: &str, a: TaskId, b: TaskId| -> Result<(), ProblemError> {
            if a == 0 || a > n || b == 0 || b > n {
                return Err(invalid(format!("{kind} pair ({a}, {b}) references an unknown task")));
            }
            if a == b {
                return Err(invalid(format!("{kind} pair ({a}, {b}) relates a task to itself")));
            }
            Ok(())
        };

        let mut prereqs = vec![TaskSet::EMPTY; n];
        for &(task, pre) in &precedence.pairs {
            check_pair("precedence", task, pre)?;
            prereqs[task - 1] = prereqs[task - 1].with(pre);
        }
        if let Some(cycle_task) = find_cycle(&prereqs) {
            return Err(invalid(format!("precedence relation contains a cycle through task {cycle_task}")));
        }

        let mut forbidden_after = vec![TaskSet::EMPTY; n];
        for &(task, succ) in &forbidden.pairs {
            check_pair("forbidden", task, succ)?;
            forbidden_after[task - 1] = forbidden_after[task - 1].with(succ);
        }

        let tc = tool_config;
        if !tc.changeover_time.is_finite() || tc.changeover_time < 0.0 {
            return Err(invalid(format!("changeover_time must be non-negative, found {}", tc.changeover_time)));
        }
        if !tc.enabled && tc.changeover_time != 0.0 {
            return Err(invalid("changeover_time must be 0 when tool changeovers are disabled"));
        }
        if tc.initial_tool != Tool::None {
            return Err(invalid("only an empty initial tool is supported by the state encoding"));
        }

        let mut problem = Self {
            name: name.into(),
            tasks,
            deltas,
            precedence,
            forbidden,
            tool_config: tc,
            measurements: None,
            prereqs,
            forbidden_after,
            warnings: Vec::new(),
        };
        problem.check_positive_durations()?;
        problem.warnings = problem.collect_warnings();
        Ok(problem)
    }

    pub fn from_document(doc: ProblemDocument) -> Result<Self, ProblemError> {
        let tasks = doc.tasks;
        let deltas = DeltaMatrix::from_rows(&doc.deltas)?;
        let precedence = PrecedenceSet { pairs: doc.precedence.iter().map(|p| (p[0], p[1])).collect() };
        let forbidden = ForbiddenPairs { pairs: doc.forbidden.iter().map(|p| (p[0], p[1])).collect() };
        let mut problem = Self::new(doc.name, tasks, deltas, precedence, forbidden, doc.tool_config)?;
        problem.measurements = doc.measurements;
        Ok(problem)
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            name: self.name.clone(),
            tasks: self.tasks.clone(),
            deltas: self.deltas.rows(),
            precedence: self.precedence.pairs.iter().map(|&(a, b)| [a, b]).collect(),
            forbidden: self.forbidden.pairs.iter().map(|&(a, b)| [a, b]).collect(),
            tool_config: self.tool_config,
            measurements: self.measurements.clone(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ProblemError> {
        let doc: ProblemDocument = serde_json::from_str(s).map_err(ProblemError::from_json)?;
        Self::from_document(doc)
    }

    /// Reads and validates a problem document.
    pub fn load<R: Read>(mut source: R) -> Result<Self, ProblemError> {
        let mut buf = String::new();
        source.read_to_string(&mut buf)?;
        Self::from_json_str(&buf)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("problem document serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id - 1]
    }

    pub fn deltas(&self) -> &DeltaMatrix {
        &self.deltas
    }

    pub fn precedence(&self) -> &PrecedenceSet {
        &self.precedence
    }

    pub fn forbidden(&self) -> &ForbiddenPairs {
        &self.forbidden
    }

    pub fn tool_config(&self) -> &ToolConfig {
        &self.tool_config
    }

    pub fn tools_enabled(&self) -> bool {
        self.tool_config.enabled
    }

    pub fn measurements(&self) -> Option<&[Vec<f64>]> {
        self.measurements.as_deref()
    }

    pub fn all_tasks(&self) -> TaskSet {
        TaskSet::full(self.num_tasks())
    }

    /// Direct prerequisites of `task`.
    pub fn prerequisites(&self, task: TaskId) -> TaskSet {
        self.prereqs[task - 1]
    }

    /// Tasks that may not immediately follow `task`.
    pub fn forbidden_after(&self, task: TaskId) -> TaskSet {
        self.forbidden_after[task - 1]
    }

    pub fn has_forbidden_pairs(&self) -> bool {
        !self.forbidden.pairs.is_empty()
    }

    /// Tasks that use `tool`.
    pub fn tasks_using(&self, tool: Tool) -> TaskSet {
        self.tasks.iter().filter(|t| t.tool == tool).map(|t| t.id).collect()
    }

    /// Whether `done` is closed under prerequisites.
    pub fn is_down_set(&self, done: TaskSet) -> bool {
        done.iter().all(|t| self.prereqs[t - 1].is_subset_of(done))
    }

    /// Whether `task` could be executed next given `done`, ignoring forbidden pairs.
    pub fn is_available(&self, done: TaskSet, task: TaskId) -> bool {
        !done.contains(task) && self.prereqs[task - 1].is_subset_of(done)
    }

    /// Tasks not yet done whose prerequisites are all done and which may
    /// follow `last`.
    pub fn feasible_actions(&self, done: TaskSet, last: Option<TaskId>) -> TaskSet {
        let blocked = last.map_or(TaskSet::EMPTY, |l| self.forbidden_after(l));
        (1..=self.num_tasks()).filter(|&t| self.is_available(done, t) && !blocked.contains(t)).collect()
    }

    /// All down-sets of the precedence order, in breadth-first order from the
    /// empty set.
    pub fn down_sets(&self) -> Vec<TaskSet> {
        let n = self.num_tasks();
        let mut seen = vec![false; 1usize << n];
        let mut out = Vec::new();
        let mut queue = VecDeque::from([TaskSet::EMPTY]);
        seen[0] = true;
        while let Some(d) = queue.pop_front() {
            out.push(d);
            for t in 1..=n {
                if self.is_available(d, t) {
                    let next = d.with(t);
                    if !seen[next.0 as usize] {
                        seen[next.0 as usize] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        out
    }

    pub fn warnings(&self) -> &[ValidationWarning] {
        &self.warnings
    }

    /// Re-runs the document-level checks. Always empty for a constructed
    /// problem's errors; returns the non-fatal warnings.
    pub fn validate(&self) -> Vec<ValidationWarning> {
        self.collect_warnings()
    }

    fn ancestors(&self, task: TaskId) -> TaskSet {
        let mut acc = TaskSet::EMPTY;
        let mut stack: Vec<TaskId> = self.prereqs[task - 1].iter().collect();
        while let Some(t) = stack.pop() {
            if !acc.contains(t) {
                acc = acc.with(t);
                stack.extend(self.prereqs[t - 1].iter());
            }
        }
        acc
    }

    fn collect_warnings(&self) -> Vec<ValidationWarning> {
        self.forbidden
            .pairs
            .iter()
            .filter(|&&(task, succ)| self.ancestors(task).contains(succ))
            .map(|&(task, successor)| ValidationWarning::RedundantForbiddenPair { task, successor })
            .collect()
    }

    fn check_positive_durations(&self) -> Result<(), ProblemError> {
        for done in self.down_sets() {
            for t in 1..=self.num_tasks() {
                if !self.is_available(done, t) {
                    continue;
                }
                let d = self.task(t).avg_time + done.iter().map(|i| self.deltas.get(i, t)).sum::<f64>();
                if d <= 0.0 {
                    return Err(invalid(format!(
                        "task {t} would have non-positive duration {d} after completing {done}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Serialize for AssemblyProblem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AssemblyProblem {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ProblemDocument::deserialize(deserializer)?;
        AssemblyProblem::from_document(doc).map_err(serde::de::Error::custom)
    }
}

/// Returns a task on a cycle, if any. `prereqs[t-1]` are the direct
/// prerequisites of task `t`.
fn find_cycle(prereqs: &[TaskSet]) -> Option<TaskId> {
    let n = prereqs.len();
    let mut indegree: Vec<usize> = prereqs.iter().map(|p| p.len()).collect();
    let mut queue: VecDeque<TaskId> = (1..=n).filter(|&t| indegree[t - 1] == 0).collect();
    let mut removed = 0;
    while let Some(t) = queue.pop_front() {
        removed += 1;
        for (i, p) in prereqs.iter().enumerate() {
            if p.contains(t) {
                indegree[i] -= 1;
                if indegree[i] == 0 {
                    queue.push_back(i + 1);
                }
            }
        }
    }
    if removed == n {
        None
    } else {
        (1..=n).find(|&t| indegree[t - 1] > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1() -> AssemblyProblem {
        builtin_scenario(BuiltinScenario::ScenarioI)
    }

    fn toy_doc() -> ProblemDocument {
        ProblemDocument {
            name: "toy".into(),
            tasks: vec![
                Task { id: 1, avg_time: 5.0, tool: Tool::None },
                Task { id: 2, avg_time: 3.0, tool: Tool::None },
                Task { id: 3, avg_time: 4.0, tool: Tool::None },
            ],
            deltas: vec![vec![0.0; 3]; 3],
            precedence: vec![],
            forbidden: vec![],
            tool_config: ToolConfig::default(),
            measurements: None,
        }
    }

    #[test]
    fn scenario1_durations_and_deltas() {
        let p = s1();
        let tau: Vec<f64> = p.tasks().iter().map(|t| t.avg_time).collect();
        assert_eq!(tau, vec![10.0, 7.0, 8.0, 6.0, 12.0, 8.0, 11.0, 9.0]);
        assert_eq!(p.deltas().get(2, 4), -1.5);
        assert_eq!(p.deltas().get(5, 6), -2.0);
        assert!(!p.tools_enabled());
    }

    #[test]
    fn scenario2_durations_and_tools() {
        let p = builtin_scenario(BuiltinScenario::ScenarioII);
        let tau: Vec<f64> = p.tasks().iter().map(|t| t.avg_time).collect();
        assert_eq!(tau, vec![6.0, 8.0, 9.0, 7.5, 10.0, 10.5, 11.5, 9.0]);
        let tc = p.tool_config();
        assert!(tc.enabled);
        assert_eq!(tc.changeover_time, 3.0);
        assert_eq!(tc.initial_tool, Tool::None);
        // The fastening device holds a tool after every task, so task 1 mounts the nut driver.
        assert_eq!(p.task(1).tool, Tool::NutDriver);
        assert_eq!(p.task(7).tool, Tool::Screwdriver);
        assert_eq!(p.tasks_using(Tool::NutDriver), TaskSet::from_iter([1, 2, 3, 4, 5, 6, 8]));
    }

    #[test]
    fn scenario2_rounded_row_matches_measurement_means() {
        // Rounded "average time" row is the ground truth; check it is the raw
        // means rounded to the nearest half unit.
        let p = builtin_scenario(BuiltinScenario::ScenarioII);
        let m = p.measurements().unwrap();
        assert_eq!(m.len(), 10);
        for t in 1..=8 {
            let mean = m.iter().map(|row| row[t - 1]).sum::<f64>() / m.len() as f64;
            assert!((p.task(t).avg_time - mean).abs() <= 0.25 + 1e-9, "task {t}: mean {mean}");
        }
    }

    #[test]
    fn feasible_actions_follow_precedence() {
        let p = s1();
        assert_eq!(p.feasible_actions(TaskSet::EMPTY, None), TaskSet::from_iter([1, 7, 8]));
        assert_eq!(p.feasible_actions(TaskSet::from_iter([1, 7, 8]), None), TaskSet::from_iter([2, 3, 4, 6]));
        assert_eq!(p.feasible_actions(p.all_tasks(), None), TaskSet::EMPTY);
    }

    #[test]
    fn forbidden_pairs_block_immediate_successor() {
        let mut doc = toy_doc();
        doc.forbidden = vec![[1, 2]];
        let p = AssemblyProblem::from_document(doc).unwrap();
        let done = TaskSet::from_iter([1]);
        assert_eq!(p.feasible_actions(done, Some(1)), TaskSet::from_iter([3]));
        assert_eq!(p.feasible_actions(done, None), TaskSet::from_iter([2, 3]));
    }

    #[test]
    fn builtins_have_no_warnings() {
        assert!(s1().validate().is_empty());
        assert!(builtin_scenario(BuiltinScenario::ScenarioII).validate().is_empty());
    }

    #[test]
    fn redundant_forbidden_pair_warns() {
        let mut doc = toy_doc();
        doc.precedence = vec![[2, 1]];
        doc.forbidden = vec![[2, 1]];
        let p = AssemblyProblem::from_document(doc).unwrap();
        assert_eq!(p.warnings(), &[ValidationWarning::RedundantForbiddenPair { task: 2, successor: 1 }]);
    }

    #[test]
    fn round_trip_through_json() {
        for id in [BuiltinScenario::ScenarioI, BuiltinScenario::ScenarioII] {
            let p = builtin_scenario(id);
            let back = AssemblyProblem::load(p.to_json_pretty().as_bytes()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn cycle_is_rejected() {
        let mut doc = toy_doc();
        doc.precedence = vec![[1, 2], [2, 1]];
        let err = AssemblyProblem::from_document(doc).unwrap_err();
        assert!(matches!(err, ProblemError::Validation(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn negative_duration_is_rejected() {
        let mut doc = toy_doc();
        doc.tasks[2].avg_time = -1.0;
        let err = AssemblyProblem::from_document(doc).unwrap_err();
        assert!(matches!(err, ProblemError::Validation(ref m) if m.contains("negative duration")), "{err}");
    }

    #[test]
    fn non_positive_effective_duration_is_rejected() {
        let mut doc = toy_doc();
        doc.deltas[0][1] = -3.0;
        assert!(AssemblyProblem::from_document(doc.clone()).is_err());
        doc.deltas[0][1] = -2.5;
        assert!(AssemblyProblem::from_document(doc).is_ok());
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(AssemblyProblem::from_json_str("{ \"name\": "), Err(ProblemError::Syntax(_))));
        assert!(matches!(AssemblyProblem::from_json_str("{ \"name\": \"x\" }"), Err(ProblemError::Schema(_))));
        let mut doc = toy_doc();
        doc.deltas.pop();
        assert!(matches!(AssemblyProblem::from_document(doc), Err(ProblemError::Schema(_))));
        let mut doc = toy_doc();
        doc.tasks[1].id = 7;
        assert!(matches!(AssemblyProblem::from_document(doc), Err(ProblemError::Validation(_))));
    }

    #[test]
    fn down_set_count_scenario1() {
        let p = s1();
        let ds = p.down_sets();
        assert_eq!(ds.len(), 100);
        assert!(ds.iter().all(|&d| p.is_down_set(d)));
    }

    #[test]
    fn task_set_iterates_ascending() {
        let s = TaskSet::from_iter([8, 1, 4]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 4, 8]);
        assert_eq!(s.to_string(), "{1,4,8}");
        assert_eq!(s.len(), 3);
    }
}
