//! Batch evaluation tooling for mitigation policies: seeded Monte Carlo
//! runs against the simulated user, an exact Markov-chain oracle, metrics
//! reports, and log replay.

pub mod batch;
pub mod exact;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod scenario;

pub use batch::{run_batch, run_trial, scenario_seed, RunConfig};
pub use exact::{analyze, exact_analysis, ExactError, ExactOptions, ExactReport};
pub use metrics::{CellMetrics, MetricsReport, TrialOutcome};
pub use replay::{replay_events, replay_file, ReplayReport};
pub use report::{emit_report, Format};
pub use scenario::{load_params, load_scenarios, ScenarioSpec};
