use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use asmseq::agent::AgentError;
use asmseq::harness::HarnessError;
use asmseq::model::ProblemError;
use asmseq::oracle::OracleError;
use thiserror::Error;

/// Failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid input files, invalid hyperparameters.
    #[error("{0}")]
    Input(String),
    /// The problem is outside what the requested exact method supports.
    #[error("{0}")]
    Limit(String),
    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    /// An experiment set gave up before collecting enough feasible runs.
    #[error("{0}")]
    Experiment(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 1,
            CliError::Limit(_) => 2,
            CliError::Output { .. } => 3,
            CliError::Experiment(_) => 4,
        })
    }

    pub fn output(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Output { path, source }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::CapExceeded { .. } | OracleError::TooLarge { .. } | OracleError::ToolsUnsupported => {
                CliError::Limit(e.to_string())
            }
            OracleError::NoFeasibleSequence => CliError::Input(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Agent(a) => a.into(),
            HarnessError::Oracle(o) => o.into(),
            HarnessError::TooManyFailures { .. } => CliError::Experiment(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
