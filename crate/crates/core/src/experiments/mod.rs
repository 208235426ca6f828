//! Experiment configuration, runners and result persistence.

pub mod config;
pub mod diagnose;
pub mod runners;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind, LossCell, ResponseSpec};
pub use diagnose::{run_diagnose, run_selftest, run_selftest_with, SelftestOptions, SelftestReport};
pub use runners::{
    run_boundary, run_descent, run_lossgrid, run_marginal, run_phase, Outcome,
};
pub use table::{agree, combined_se, ResultTable, Row};

/// Dispatch on `config.experiment`.
pub fn run(config: &ExperimentConfig) -> crate::Result<Outcome> {
    match config.experiment {
        ExperimentKind::Lossgrid => run_lossgrid(config),
        ExperimentKind::Marginal => run_marginal(config),
        ExperimentKind::Boundary => run_boundary(config),
        ExperimentKind::Phase => run_phase(config),
        ExperimentKind::Descent => run_descent(config),
        ExperimentKind::Diagnose => run_diagnose(config),
        ExperimentKind::Selftest => diagnose::selftest_outcome(config),
    }
}
