use std::path::PathBuf;

use asmseq::agent::{DecaySchedule, Hyperparams};
use asmseq::harness;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "asmseq", version, about = "Assembly sequencing with tabular Q-learning and an exact oracle")]
pub struct Cli {
    /// Worker threads for replicated experiments (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List every feasible sequence and the distribution of total times.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Refuse problems with more tasks than this.
        #[arg(long, default_value_t = asmseq::oracle::DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Minimum total time and all optimal sequences by dynamic programming.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the assignment model as `model.lp`.
        #[arg(long)]
        export_milp: bool,
        /// Maximum number of optimal sequences listed in the solution.
        #[arg(long, default_value_t = asmseq::oracle::DEFAULT_SEQUENCE_CAP)]
        sequence_cap: usize,
    },
    /// Write the assignment model in LP format.
    ExportMilp {
        #[command(flatten)]
        common: Common,
    },
    /// Train one agent and extract its greedy sequence.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long, env = "ASMSEQ_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Run a hyperparameter sweep described by a JSON spec file.
    Sweep {
        /// Sweep spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's problem.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the spec's base seed.
        #[arg(long, env = "ASMSEQ_SEED")]
        seed: Option<u64>,
        /// Overrides the spec's replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Plot-ready series for one problem: distribution, learning curve and the
    /// decay/episode fit.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long, env = "ASMSEQ_SEED", default_value_t = 0)]
        seed: u64,
        /// Moving-average window for the learning curve and plateau.
        #[arg(long, default_value_t = 100)]
        window: usize,
        /// Also run this many replications and report their metrics.
        #[arg(long)]
        replications: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// `builtin:scenario1`, `builtin:scenario2` or a problem file.
    #[arg(long, default_value = "builtin:scenario1")]
    pub problem: String,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Estimated-times settings (decay 0.0001, 3000 episodes, r_m = r_s = 20).
    Scenario1,
    /// Tool-changeover settings (decay 0.00005, 6500 episodes, r_m = 13, r_s = 9).
    Scenario2,
    /// Scenario 2 with action masking; the decay follows the decay/episode fit.
    Scenario3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    PerStep,
    PerEpisode,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, value_enum, default_value = "scenario2")]
    pub preset: Preset,
    /// Restrict selection to feasible tasks instead of penalising others.
    #[arg(long)]
    pub masking: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub epsilon_decay: Option<f64>,
    #[arg(long)]
    pub epsilon_floor: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub max_episodes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub reward_shift: Option<f64>,
    #[arg(long)]
    pub reward_multiplier: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub reward_penalty: Option<f64>,
}

/// Episodes used by the masked preset when none are given.
pub const MASKED_DEFAULT_EPISODES: usize = 780;

pub fn preset_hyperparams(preset: Preset, max_episodes: Option<usize>) -> Hyperparams {
    let mut hp = match preset {
        Preset::Scenario1 => Hyperparams::scenario_i(),
        Preset::Scenario2 => Hyperparams::scenario_ii_optimal(),
        Preset::Scenario3 => harness::masked_hyperparams(max_episodes.unwrap_or(MASKED_DEFAULT_EPISODES)),
    };
    if let Some(e) = max_episodes {
        hp.max_episodes = e;
    }
    hp
}

impl HyperArgs {
    pub fn resolve(&self) -> Hyperparams {
        let mut hp = preset_hyperparams(self.preset, self.max_episodes);
        hp.masking |= self.masking;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut hp.alpha, self.alpha);
        set(&mut hp.gamma, self.gamma);
        set(&mut hp.epsilon, self.epsilon);
        set(&mut hp.epsilon_decay, self.epsilon_decay);
        set(&mut hp.epsilon_floor, self.epsilon_floor);
        set(&mut hp.rewards.shift, self.reward_shift);
        set(&mut hp.rewards.multiplier, self.reward_multiplier);
        set(&mut hp.rewards.penalty, self.reward_penalty);
        if let Some(s) = self.max_steps {
            hp.max_steps = s;
        }
        if let Some(s) = self.schedule {
            hp.schedule = match s {
                Schedule::PerStep => DecaySchedule::PerStepMultiplicative,
                Schedule::PerEpisode => DecaySchedule::PerEpisodeLinear,
            };
        }
        hp
    }
}
