//! Run configurations, the `h`-sweep across all spectral routes, fits, and
//! the command-line front end.

pub mod cli;
mod config;
mod experiments;
mod fit;
mod sweep;

pub use config::{
    parse_config, EffectiveSettings, Experiments, OscillatorSettings, OutputSettings, RunConfig, SolverSettings,
    StabilitySettings,
};
pub use experiments::{effective_run, oscillator_suite, stability_sweep, EffectiveLevels, EffectiveRun};
pub use fit::{fit_report, FitReport, FitSummary};
pub use sweep::{
    discretization, prepare_well, run_sweep, solver_options, write_sweep_csv, StageFailure, SweepReport, SweepRow,
    SWEEP_COLUMNS,
};

use thiserror::Error;

use crate::asymptotics::FitError;
use crate::effective::EffectiveError;
use crate::field::FieldError;
use crate::oscillator::OscillatorError;
use crate::solver2d::SolverError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<FieldError> for HarnessError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::UnknownCatalog(_) | FieldError::InvalidSpec(_) => HarnessError::Config(e.to_string()),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(m) => HarnessError::Config(m),
            SolverError::Io(io) => HarnessError::Io(io),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<EffectiveError> for HarnessError {
    fn from(e: EffectiveError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

impl From<OscillatorError> for HarnessError {
    fn from(e: OscillatorError) -> Self {
        match e {
            OscillatorError::InvalidGrid(m) => HarnessError::Config(m),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}
