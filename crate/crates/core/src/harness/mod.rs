//! Experiment configuration, replication runner and artifact output.

mod config;
mod examples;
mod run;
mod simulate;

pub use config::{
    load_config, resolve_output_dir, ExperimentConfig, GenerateSection, MarketSection, DEFAULT_OUTPUT_DIR, OUTPUT_ENV,
};
pub use examples::{named_example, EXAMPLE_NAMES};
pub use run::{
    market_summary, mean_se, run_experiment, run_replication, run_replications, summarize, write_artifacts,
    CheckpointSummary, ConvergenceSummary, ExperimentReport, HintedSummary, Manifest, MarketSummary, MeanSe,
    PhaseSummary, PlateauSummary, ReplicationBody, ReplicationResult, Summary, TOOL_NAME, TOOL_VERSION,
};
pub use simulate::{
    hinted_algo, simulate_hinted, simulate_market, simulate_market_with, Algorithm, Checkpoint, HintedRecord,
    InvariantTally, MatchingRun, RunSpec,
};
