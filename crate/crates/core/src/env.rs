//! Deterministic assembly MDP.
//!
//! A state is the set of completed tasks plus the tool currently mounted on
//! the fastening device. Actions are task ids. Selecting a task whose
//! prerequisites are not yet done is an *impossible* action: the state does
//! not change and the agent receives the penalty reward.
//!
//! State ordinals are stable and used as Q-table row indices:
//!
//! * tools disabled: `ordinal = done_mask`, `2^N` states;
//! * tools enabled: `(0, None) -> 0` and `(mask, tool) -> 2*mask - 1 + (tool - 1)`
//!   for `mask >= 1`, `2*(2^N - 1) + 1` states. A non-empty set containing no
//!   tool-using task keeps the empty tool and is stored in the screwdriver slot
//!   of its mask, which no reachable state can occupy.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AssemblyProblem, TaskId, TaskSet, Tool};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("state encoding violation: {0}")]
    Encoding(String),
    #[error("task {task} is not feasible after {done}")]
    Infeasible { task: TaskId, done: TaskSet },
    #[error("task {0} does not exist")]
    UnknownTask(TaskId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EnvState {
    pub done: TaskSet,
    pub tool: Tool,
    /// Previously executed task. Only consulted for forbidden successions; it
    /// is not part of the state ordinal.
    pub last: Option<TaskId>,
}

impl EnvState {
    pub fn new(done: TaskSet, tool: Tool) -> Self {
        Self { done, tool, last: None }
    }
}

/// Shaping constants: a feasible action earns `multiplier * (shift - duration)`,
/// an impossible one earns `penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub multiplier: f64,
    pub shift: f64,
    pub penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { multiplier: 1.0, shift: 0.0, penalty: -1_000_000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Possible,
    Impossible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: EnvState,
    pub reward: f64,
    pub terminal: bool,
    pub kind: StepKind,
}

pub fn initial_state(problem: &AssemblyProblem) -> EnvState {
    EnvState { done: TaskSet::EMPTY, tool: problem.tool_config().initial_tool, last: None }
}

pub fn is_terminal(problem: &AssemblyProblem, state: &EnvState) -> bool {
    state.done == problem.all_tasks()
}

pub fn state_space_size(problem: &AssemblyProblem) -> usize {
    let n = problem.num_tasks();
    if problem.tools_enabled() {
        2 * ((1usize << n) - 1) + 1
    } else {
        1usize << n
    }
}

pub fn state_ordinal(problem: &AssemblyProblem, state: &EnvState) -> Result<usize, EnvError> {
    let mask = state.done.0 as usize;
    if !state.done.is_subset_of(problem.all_tasks()) {
        return Err(EnvError::Encoding(format!("done set {} has unknown tasks", state.done)));
    }
    if !problem.tools_enabled() {
        if state.tool != Tool::None {
            return Err(EnvError::Encoding("tool mounted while changeovers are disabled".into()));
        }
        return Ok(mask);
    }
    if mask == 0 {
        return match state.tool {
            Tool::None => Ok(0),
            t => Err(EnvError::Encoding(format!("{t:?} mounted before any task is done"))),
        };
    }
    let uses_tools = state.done.iter().any(|t| problem.task(t).tool.is_some());
    match state.tool {
        Tool::None if uses_tools => {
            Err(EnvError::Encoding(format!("no tool mounted although {} contains a tool-using task", state.done)))
        }
        Tool::None => Ok(2 * mask - 1),
        tool => {
            if !problem.tasks_using(tool).iter().any(|t| state.done.contains(t)) {
                return Err(EnvError::Encoding(format!("{tool:?} mounted but no done task in {} uses it", state.done)));
            }
            Ok(2 * mask - 1 + (tool.index() - 1))
        }
    }
}

/// Time needed to execute `action` from `state`: average time, plus the
/// adjustments of every completed task, plus a changeover when the task needs
/// a tool other than the mounted one.
pub fn duration(problem: &AssemblyProblem, state: &EnvState, action: TaskId) -> Result<f64, EnvError> {
    if action == 0 || action > problem.num_tasks() {
        return Err(EnvError::UnknownTask(action));
    }
    if !problem.feasible_actions(state.done, state.last).contains(action) {
        return Err(EnvError::Infeasible { task: action, done: state.done });
    }
    Ok(duration_unchecked(problem, state, action))
}

pub(crate) fn duration_unchecked(problem: &AssemblyProblem, state: &EnvState, action: TaskId) -> f64 {
    let task = problem.task(action);
    let deltas = problem.deltas();
    let mut d = task.avg_time;
    for i in state.done.iter() {
        d += deltas.get(i, action);
    }
    let tc = problem.tool_config();
    if tc.enabled && task.tool.is_some() && state.tool != task.tool {
        d += tc.changeover_time;
    }
    d
}

fn advance(problem: &AssemblyProblem, state: &EnvState, action: TaskId) -> EnvState {
    let task_tool = problem.task(action).tool;
    let tool = if problem.tools_enabled() && task_tool.is_some() { task_tool } else { state.tool };
    EnvState { done: state.done.with(action), tool, last: Some(action) }
}

pub fn reward(params: &RewardParams, problem: &AssemblyProblem, state: &EnvState, action: TaskId) -> f64 {
    match duration(problem, state, action) {
        Ok(d) => params.multiplier * (params.shift - d),
        Err(_) => params.penalty,
    }
}

pub fn step(problem: &AssemblyProblem, rewards: &RewardParams, state: &EnvState, action: TaskId) -> StepOutcome {
    match duration(problem, state, action) {
        Ok(d) => {
            let next = advance(problem, state, action);
            StepOutcome {
                next,
                reward: rewards.multiplier * (rewards.shift - d),
                terminal: is_terminal(problem, &next),
                kind: StepKind::Possible,
            }
        }
        Err(_) => StepOutcome {
            next: *state,
            reward: rewards.penalty,
            terminal: is_terminal(problem, state),
            kind: StepKind::Impossible,
        },
    }
}

/// Number of distinct `(done, tool)` states reachable from the initial state.
pub fn reachable_state_count(problem: &AssemblyProblem) -> usize {
    reachable_states(problem).len()
}

pub fn reachable_states(problem: &AssemblyProblem) -> Vec<EnvState> {
    let start = initial_state(problem);
    let mut seen: HashSet<EnvState> = HashSet::from([start]);
    let mut order = vec![start];
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in problem.feasible_actions(s.done, s.last).iter() {
            let mut next = advance(problem, &s, a);
            if !problem.has_forbidden_pairs() {
                next.last = None;
            }
            if seen.insert(next) {
                order.push(next);
                queue.push_back(next);
            }
        }
    }
    if problem.has_forbidden_pairs() {
        // Count MDP states, which do not include the previous task.
        let mut unique = HashSet::new();
        order.retain(|s| unique.insert((s.done, s.tool)));
        for s in &mut order {
            s.last = None;
        }
    }
    order
}

/// Total time of a full or partial sequence, or the first infeasible step.
pub fn sequence_time(problem: &AssemblyProblem, sequence: &[TaskId]) -> Result<f64, EnvError> {
    let mut state = initial_state(problem);
    let mut total = 0.0;
    for &a in sequence {
        total += duration(problem, &state, a)?;
        state = advance(problem, &state, a);
    }
    Ok(total)
}

/// Per-step durations of a sequence.
pub fn sequence_durations(problem: &AssemblyProblem, sequence: &[TaskId]) -> Result<Vec<f64>, EnvError> {
    let mut state = initial_state(problem);
    let mut out = Vec::with_capacity(sequence.len());
    for &a in sequence {
        out.push(duration(problem, &state, a)?);
        state = advance(problem, &state, a);
    }
    Ok(out)
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

    fn set(ts: &[TaskId]) -> TaskSet {
        ts.iter().copied().collect()
    }

    #[test]
    fn initial_state_is_zero() {
        let p = s1();
        let s0 = initial_state(&p);
        assert_eq!(state_ordinal(&p, &s0), Ok(0));
        assert!(!is_terminal(&p, &s0));
        let p2 = s2();
        let s0 = initial_state(&p2);
        assert_eq!((s0.done, s0.tool), (TaskSet::EMPTY, Tool::None));
        assert_eq!(state_ordinal(&p2, &s0), Ok(0));
    }

    #[test]
    fn ordinals_and_sizes() {
        let p = s1();
        assert_eq!(state_space_size(&p), 256);
        assert_eq!(state_ordinal(&p, &EnvState::new(p.all_tasks(), Tool::None)), Ok(255));
        let p2 = s2();
        assert_eq!(state_space_size(&p2), 511);
        let s = EnvState::new(set(&[7]), Tool::Screwdriver);
        assert_eq!(state_ordinal(&p2, &s), Ok(2 * 64 - 1));
        let s = EnvState::new(set(&[7, 8]), Tool::NutDriver);
        assert_eq!(state_ordinal(&p2, &s), Ok(2 * 192 - 1 + 1));
    }

    #[test]
    fn invalid_tool_states_are_rejected() {
        let p2 = s2();
        let bad = EnvState::new(set(&[7]), Tool::None);
        assert!(matches!(state_ordinal(&p2, &bad), Err(EnvError::Encoding(_))));
        let bad = EnvState::new(set(&[7]), Tool::NutDriver);
        assert!(state_ordinal(&p2, &bad).is_err());
        let bad = EnvState::new(set(&[1]), Tool::None);
        assert!(state_ordinal(&p2, &bad).is_err());
        let ok = EnvState::new(set(&[1]), Tool::NutDriver);
        assert_eq!(state_ordinal(&p2, &ok), Ok(2));
        let p1 = s1();
        assert!(state_ordinal(&p1, &EnvState::new(set(&[7]), Tool::Screwdriver)).is_err());
    }

    #[test]
    fn ordinal_is_bijective_without_tools() {
        let p = s1();
        let mut seen = vec![false; state_space_size(&p)];
        for mask in 0..256u32 {
            let o = state_ordinal(&p, &EnvState::new(TaskSet(mask), Tool::None)).unwrap();
            assert!(!seen[o]);
            seen[o] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn ordinal_is_injective_with_tools() {
        let p = s2();
        let size = state_space_size(&p);
        let mut seen = vec![false; size];
        let mut valid = 0;
        for mask in 0..256u32 {
            for tool in [Tool::None, Tool::Screwdriver, Tool::NutDriver] {
                if let Ok(o) = state_ordinal(&p, &EnvState::new(TaskSet(mask), tool)) {
                    assert!(o < size);
                    assert!(!seen[o], "collision at {o}");
                    seen[o] = true;
                    valid += 1;
                }
            }
        }
        assert!(valid <= size);
        for s in reachable_states(&p) {
            assert!(state_ordinal(&p, &s).is_ok());
        }
    }

    #[test]
    fn durations_match_worked_examples() {
        let p = s1();
        assert_eq!(duration(&p, &initial_state(&p), 1), Ok(10.0));
        let s = EnvState::new(set(&[8, 1, 3, 4, 7]), Tool::None);
        assert_eq!(duration(&p, &s, 2), Ok(6.5));
        let p2 = s2();
        assert_eq!(duration(&p2, &initial_state(&p2), 7), Ok(14.5));
        assert!(matches!(duration(&p, &initial_state(&p), 5), Err(EnvError::Infeasible { task: 5, .. })));
        assert_eq!(duration(&p, &initial_state(&p), 9), Err(EnvError::UnknownTask(9)));
    }

    #[test]
    fn worked_sequences() {
        let p = s1();
        assert_eq!(
            sequence_durations(&p, &[8, 1, 3, 4, 7, 2, 6, 5]).unwrap(),
            vec![9.0, 10.0, 8.0, 6.0, 11.0, 6.5, 7.0, 12.0]
        );
        assert_eq!(sequence_time(&p, &[1, 8, 4, 7, 5, 2, 6, 3]), Ok(65.0));
        let p2 = s2();
        assert_eq!(sequence_time(&p2, &[7, 1, 8, 2, 4, 5, 6, 3]), Ok(64.0));
        assert_eq!(sequence_time(&p2, &[7, 8, 1, 2, 4, 5, 6, 3]), Ok(64.0));
    }

    #[test]
    fn rewards() {
        let p = s1();
        let s0 = initial_state(&p);
        let unit = RewardParams { multiplier: 1.0, shift: 0.0, penalty: -1e6 };
        assert_eq!(reward(&unit, &p, &s0, 1), -10.0);
        assert_eq!(reward(&unit, &p, &s0, 5), -1_000_000.0);
        let shaped = RewardParams { multiplier: 20.0, shift: 20.0, penalty: -1e6 };
        assert_eq!(reward(&shaped, &p, &s0, 1), 200.0);
    }

    #[test]
    fn steps() {
        let p = s1();
        let r = RewardParams { multiplier: 1.0, shift: 0.0, penalty: -10_000.0 };
        let s0 = initial_state(&p);
        let out = step(&p, &r, &s0, 5);
        assert_eq!(out.kind, StepKind::Impossible);
        assert_eq!(out.next, s0);
        assert_eq!(out.reward, -10_000.0);
        assert!(!out.terminal);

        let almost = EnvState::new(set(&[1, 2, 3, 4, 5, 6, 7]), Tool::None);
        let out = step(&p, &r, &almost, 8);
        assert!(out.terminal);
        assert_eq!(out.kind, StepKind::Possible);

        let p2 = s2();
        let r2 = RewardParams { multiplier: 13.0, shift: 9.0, penalty: -1e6 };
        let out = step(&p2, &r2, &initial_state(&p2), 7);
        assert_eq!(out.next.done, set(&[7]));
        assert_eq!(out.next.tool, Tool::Screwdriver);
        assert_eq!(out.reward, 13.0 * (9.0 - 14.5));

        let after7 = out.next;
        let out = step(&p2, &r2, &after7, 1);
        assert_eq!(out.next.tool, Tool::NutDriver);
        assert_eq!(out.reward, 13.0 * (9.0 - 9.0));

        // A tool-free task leaves the mounted tool alone.
        let mut doc = p2.to_document();
        doc.tasks[0].tool = Tool::None;
        let free = AssemblyProblem::from_document(doc).unwrap();
        let out = step(&free, &r2, &after7, 1);
        assert_eq!(out.next.tool, Tool::Screwdriver);
        assert_eq!(out.reward, 13.0 * (9.0 - 6.0));
    }

    #[test]
    fn reachable_counts() {
        assert_eq!(reachable_state_count(&s1()), 100);
        // 100 down-sets; the 49 non-empty ones containing task 7 and some other
        // task admit either tool, so 100 + 49 = 149.
        assert_eq!(reachable_state_count(&s2()), 149);
        let single = AssemblyProblem::new(
            "single",
            vec![Task { id: 1, avg_time: 5.0, tool: Tool::None }],
            DeltaMatrix::zeros(1),
            PrecedenceSet::default(),
            ForbiddenPairs::default(),
            ToolConfig::default(),
        )
        .unwrap();
        assert_eq!(reachable_state_count(&single), 2);
    }
}
