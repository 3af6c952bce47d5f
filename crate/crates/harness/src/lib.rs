//! Experiment harness for `safelimit-core`: JSON configuration, seeded
//! pre-train → transfer runs with checkpoint/resume, JSONL iteration logs,
//! CSV emission and constraint audits.

pub mod config;
mod error;
pub mod experiment;
pub mod records;
pub mod verify;

pub use config::{ExperimentConfig, Preset};
pub use error::{HarnessError, Result};
pub use experiment::{run, Job, RunOutcome};
pub use records::IterationRecord;
