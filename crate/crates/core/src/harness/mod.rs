//! Monte-Carlo experiments over sample sizes and seeds, and their reports.

pub mod experiment;
pub mod plan;
pub mod report;
pub mod selftest;

pub use experiment::{
    run_consistency, run_experiment, run_term_decay, ConvergenceReport, ConvergenceRow, DecayRow, DecayTable,
    SeedRecord, Tasks,
};
pub use plan::{BandwidthRule, DriftSpec, ExperimentPlan, KernelSpec, XGridSpec};
pub use report::{emit_report, ReportFormat};
pub use selftest::{run_selftest, Check, SelfTestConfig, SelfTestReport};
