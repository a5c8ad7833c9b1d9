//! Reproducible experiment runner: configuration, seeding, parallel
//! replication, aggregation and persistence.

pub mod config;
pub mod records;
pub mod runner;

pub use crate::rng::seed_for_replica;
pub use config::{Experiment, LimitConstant, Params, RunConfig};
pub use records::{read_results, write_results, Payload, RecordWriter, ResultRecord, ResultsHeader};
pub use runner::{
    aggregate, failures_path, report_path, run_experiment, run_replicas, tree_estimate, tree_sum,
    AggregateReport, Failure, RunOutcome,
};
