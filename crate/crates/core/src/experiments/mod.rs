//! Config-driven sweeps, the preset scenarios and their CSV/JSON output.

mod config;
mod runner;
mod scenarios;

pub use config::{ExperimentConfig, ModelSection, OutputFormat, OutputSection, ProblemSection, RunSpec, SweepSection};
pub use runner::{
    execute_all, run_sweep, sha256_hex, stability_constant, summary_csv, timing_lines, tool_version, RunContext,
    RunOutcome, SweepOutcome, SUMMARY_HEADER,
};
pub use scenarios::{
    adversary, counterexample_csv, counterexample_problem, hp_csv, scenario_convergence, scenario_counterexample,
    scenario_hp_vs_strong, ConvergenceCell, ConvergenceReport, CounterexampleRow, HpRow, ScenarioSetup,
    COUNTEREXAMPLE_HEADER, HP_HEADER,
};
