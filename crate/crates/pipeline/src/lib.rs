//! Orchestration for puddlemap: configuration, the per-stage commands,
//! output files, and the HTTP service used by the annotation client.

pub mod commands;
pub mod config;
pub mod error;
pub mod geojson;
pub mod ops;
pub mod rle;
pub mod service;

pub use commands::{
    cmd_classify, cmd_correlate, cmd_georef, cmd_resect, cmd_segment, cmd_sofi, HumanInputs, Outcome,
};
pub use config::PipelineConfig;
pub use error::{PipelineError, EXIT_INPUT, EXIT_OK, EXIT_PROCESSING};
