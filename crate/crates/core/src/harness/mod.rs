//! Experiment harness: configuration, datasets and scenario drivers that
//! emit CSV metric rows.

pub mod config;
pub mod data;
pub mod experiments;

pub use config::{parse_config_text, ExperimentConfig, PrivacyKind, Scenario};
pub use data::{load_locations_csv, read_locations, synth_locations, write_locations_csv, LocationDistribution};
pub use experiments::{
    has_infeasible, job_seed, loglog_slope, mean_std, rate_threshold, rate_upper_bound, resolve_budget, run,
    run_crowdsourcing, run_incentive, run_protocol_demo, run_rates, run_single_report, run_social,
    synth_gradients, theoretical_rates, write_rows, Budget, MetricRow, ProtocolDemo, CSV_HEADER,
    INFEASIBLE_METRIC,
};
