//! Reproducible execution: random streams, aggregation, configuration,
//! output and the acceptance suite.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod report;
pub mod stream;
pub mod validate;

pub use aggregate::{aggregate, run_replicas, EstimateRecord, Moments, Partial, Replica};
pub use config::{Format, RunConfig};
pub use stream::{derive_stream, derive_stream_in, Stream};
pub use validate::{run_validate, CriterionResult, Tier, ValidateOptions, ValidateReport};
