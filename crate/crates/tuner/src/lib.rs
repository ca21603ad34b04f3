//! Command line, file formats and external evaluator backends for the tuner.
//!
//! The search itself lives in `pareto_tuner_core`; this crate adds what needs an operating
//! system: subprocess backends speaking the line protocol ([`protocol`]), parallel evaluator
//! pools ([`pool`]), archive, cache, space and config files, and report writers.

pub mod archive_file;
pub mod commands;
pub mod config;
pub mod disk_cache;
pub mod pool;
pub mod protocol;
pub mod report;
pub mod space_file;

pub use commands::CliError;
pub use config::ExperimentConfig;
