//! Experiment plans, the runner that executes them, and reporting.

pub mod execute;
pub mod plan;
pub mod results;
pub mod summary;

pub use execute::{execute_plan, read_manifest, ExecuteOptions, ExecuteReport, Manifest};
pub use plan::{builtin_plan, load_plan, Experiment, ExperimentPlan, PlanError, BUILTIN_PLANS};
pub use results::{read_rows, write_rows, ResultRow};
pub use summary::{summarize, summarize_rows, GroupSummary, Summary};
