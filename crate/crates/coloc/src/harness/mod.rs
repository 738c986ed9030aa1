//! Scenario definition, ground truth generation, noise injection, method
//! orchestration, metrics, and log formats.

pub mod logs;
pub mod metrics;
pub mod run;
pub mod scenario;

pub use logs::{parse_csv, rows_from_csv, rows_to_csv, write_csv, CSV_HEADER};
pub use metrics::{compute_metrics, LogRow, RobotMetrics};
pub use run::{
    build_timeline, mutual_visibility, run_method, run_scenario, run_trial, summarize,
    BandwidthSummary, Event, MethodRun, MethodSummary, Report, Timeline, TrialOutput,
};
pub use scenario::{default_scenario, ControlProgram, Method, ProgramSegment, Scenario};
