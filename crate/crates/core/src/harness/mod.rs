//! Experiment phases, exploration and validation metrics, statistics and
//! run artifacts.

pub mod artifacts;
pub mod coverage;
pub mod experiment;
pub mod metrics;
pub mod run;
pub mod split;
pub mod stats;

pub use coverage::CoverageGrid;
pub use experiment::{run_one, run_suite, RunOutput};
pub use metrics::{error_percentage, error_percentage_with, estimate_diameter, max_pairwise_distance, ErrorReport};
pub use run::{
    run_dap, run_postdap, train_oracle, train_on_dataset, DapOutcome, OracleOutcome, PhasePlan, PostDapOutcome, Stage,
    TraceRow, ValidationContext,
};
pub use split::OracleSplit;
pub use stats::{
    compare_variants, mann_whitney_u, mann_whitney_u_with, Comparison, MeanSd, Phase, SummaryRow, Terminal, TestRow, UMethod,
    UTest, HYPOTHESES,
};
