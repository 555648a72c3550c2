//! Learning time-optimal assembly sequences with tabular Q-learning.
//!
//! * [`model`]: assembly problems, validation and the two built-in datasets;
//! * [`env`]: the deterministic MDP (state encoding, durations, shaped reward);
//! * [`agent`]: epsilon-greedy Q-learning and greedy policy extraction;
//! * [`oracle`]: exhaustive enumeration, exact dynamic programming and an LP
//!   exporter for the equivalent assignment model;
//! * [`harness`]: replicated experiments, sweeps and the decay/episode fit.

pub mod agent;
pub mod env;
pub mod harness;
pub mod model;
pub mod numfmt;
pub mod oracle;

pub use agent::{greedy_rollout, train, Hyperparams, QTable, Rollout, TrainedAgent};
pub use env::{EnvState, RewardParams};
pub use model::{builtin_scenario, AssemblyProblem, BuiltinScenario, TaskId, TaskSet, Tool};
pub use oracle::{enumerate_feasible, solve_dp, ExactSolution};
