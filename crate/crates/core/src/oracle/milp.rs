//! Assignment-model export in CPLEX LP format.
//!
//! Variables: `Y_i_k` (task `i` runs at step `k`, binary), `C_i_k` (completion
//! time of task `i` at step `k`) and `Cmax`. Rows:
//!
//! * `mk_i`: `Cmax >= C_i_N` for every task;
//! * `step_k`, `task_i`: one task per step, one step per task;
//! * `prec_i_p_k_l`: `Y_i_k + Y_p_l <= 1` for each `(task, prerequisite)` pair
//!   and `k < l`, so a prerequisite never runs after its dependent;
//! * `c_i_1`: `C_i_1 >= tau_i * Y_i_1`;
//! * `c_i_j_k` for `k > 1` and predecessor candidate `j`: when `i` runs at `k`
//!   directly after `j`, `C_i_k >= C_j_(k-1) + tau_i + sum of the deltas of
//!   every task placed before `k``; relaxed by big-M otherwise;
//! * `forb_j_i_k`: `Y_j_(k-1) + Y_i_k <= 1` for forbidden successions, which
//!   also drop the matching `c_i_j_k` rows.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::OracleError;
use crate::model::{AssemblyProblem, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Cmax,
    C(TaskId, usize),
    Y(TaskId, usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Y(i, k) => write!(f, "Y_{i}_{k}"),
            Var::C(i, k) => write!(f, "C_{i}_{k}"),
            Var::Cmax => f.write_str("Cmax"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    fn new(name: String, terms: BTreeMap<Var, f64>, sense: Sense, rhs: f64) -> Self {
        let terms = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        Self { name, terms, sense, rhs }
    }

    pub fn lhs(&self, value: impl Fn(Var) -> f64) -> f64 {
        self.terms.iter().map(|&(v, c)| c * value(v)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub tasks: usize,
    pub big_m: f64,
    pub rows: Vec<Row>,
}

impl MilpModel {
    pub fn binary_variables(&self) -> usize {
        self.tasks * self.tasks
    }

    pub fn continuous_variables(&self) -> usize {
        self.tasks * self.tasks + 1
    }

    pub fn total_variables(&self) -> usize {
        self.binary_variables() + self.continuous_variables()
    }

    pub fn constraint_count(&self) -> usize {
        self.rows.len()
    }

    /// Row counts by family, in export order.
    pub fn row_families(&self) -> Vec<(&'static str, usize)> {
        let families = [
            ("mk", "makespan"),
            ("step", "step"),
            ("task", "task"),
            ("prec", "precedence"),
            ("c", "completion"),
            ("forb", "forbidden"),
        ];
        families
            .iter()
            .map(|&(prefix, label)| {
                let count = self.rows.iter().filter(|r| r.name.split('_').next() == Some(prefix)).count();
                (label, count)
            })
            .collect()
    }

    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let n = self.tasks;
        let _ = writeln!(s, "\\Problem name: {}", self.name);
        let _ = writeln!(
            s,
            "\\ {} binary, {} total variables, {} constraints",
            self.binary_variables(),
            self.total_variables(),
            self.constraint_count()
        );
        let _ = writeln!(s, "\nMinimize\n obj: Cmax\nSubject To");
        for row in &self.rows {
            let _ = write!(s, " {}:", row.name);
            for (i, (v, c)) in row.terms.iter().enumerate() {
                if i > 0 && i % 8 == 0 {
                    s.push_str("\n   ");
                }
                let sign = if *c < 0.0 { '-' } else { '+' };
                let mag = c.abs();
                if mag == 1.0 {
                    let _ = write!(s, " {sign} {v}");
                } else {
                    let _ = write!(s, " {sign} {mag} {v}");
                }
            }
            let _ = writeln!(s, " {} {}", row.sense.symbol(), row.rhs);
        }
        s.push_str("Bounds\n");
        for i in 1..=n {
            for k in 1..=n {
                let _ = writeln!(s, " C_{i}_{k} >= 0");
            }
        }
        s.push_str(" Cmax >= 0\nBinary\n");
        for i in 1..=n {
            let names: Vec<String> = (1..=n).map(|k| Var::Y(i, k).to_string()).collect();
            let _ = writeln!(s, " {}", names.join(" "));
        }
        s.push_str("End\n");
        s
    }
}

/// Builds the assignment model. Tool changeovers have no counterpart in it.
pub fn export_milp(problem: &AssemblyProblem) -> Result<MilpModel, OracleError> {
    if problem.tools_enabled() {
        return Err(OracleError::ToolsUnsupported);
    }
    let n = problem.num_tasks();
    let deltas = problem.deltas();
    let tau = |i: TaskId| problem.task(i).avg_time;

    // Upper bound on any sequence's total time.
    let horizon: f64 = (1..=n).map(|i| tau(i) + (1..=n).map(|h| deltas.get(h, i).max(0.0)).sum::<f64>()).sum();
    let big_m = horizon.ceil() + 1.0;

    let mut rows = Vec::new();
    let one = |pairs: &[(Var, f64)]| pairs.iter().copied().collect::<BTreeMap<Var, f64>>();

    for i in 1..=n {
        rows.push(Row::new(format!("mk_{i}"), one(&[(Var::Cmax, 1.0), (Var::C(i, n), -1.0)]), Sense::Ge, 0.0));
    }
    for k in 1..=n {
        rows.push(Row::new(format!("step_{k}"), (1..=n).map(|i| (Var::Y(i, k), 1.0)).collect(), Sense::Eq, 1.0));
    }
    for i in 1..=n {
        rows.push(Row::new(format!("task_{i}"), (1..=n).map(|k| (Var::Y(i, k), 1.0)).collect(), Sense::Eq, 1.0));
    }
    for &(task, pre) in &problem.precedence().pairs {
        for k in 1..=n {
            for l in (k + 1)..=n {
                rows.push(Row::new(
                    format!("prec_{task}_{pre}_{k}_{l}"),
                    one(&[(Var::Y(task, k), 1.0), (Var::Y(pre, l), 1.0)]),
                    Sense::Le,
                    1.0,
                ));
            }
        }
    }
    for i in 1..=n {
        rows.push(Row::new(format!("c_{i}_1"), one(&[(Var::C(i, 1), 1.0), (Var::Y(i, 1), -tau(i))]), Sense::Ge, 0.0));
    }
    for k in 2..=n {
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                if problem.forbidden_after(j).contains(i) {
                    continue;
                }
                let mut terms = BTreeMap::new();
                terms.insert(Var::C(i, k), 1.0);
                terms.insert(Var::C(j, k - 1), -1.0);
                for h in (1..=n).filter(|&h| h != i) {
                    let d = deltas.get(h, i);
                    if d != 0.0 {
                        for earlier in 1..k {
                            *terms.entry(Var::Y(h, earlier)).or_insert(0.0) -= d;
                        }
                    }
                }
                *terms.entry(Var::Y(i, k)).or_insert(0.0) -= big_m;
                *terms.entry(Var::Y(j, k - 1)).or_insert(0.0) -= big_m;
                rows.push(Row::new(format!("c_{i}_{j}_{k}"), terms, Sense::Ge, tau(i) - 2.0 * big_m));
            }
        }
    }
    for &(j, i) in &problem.forbidden().pairs {
        for k in 2..=n {
            rows.push(Row::new(
                format!("forb_{j}_{i}_{k}"),
                one(&[(Var::Y(j, k - 1), 1.0), (Var::Y(i, k), 1.0)]),
                Sense::Le,
                1.0,
            ));
        }
    }

    Ok(MilpModel { name: problem.name().to_string(), tasks: n, big_m, rows })
}
