//! Library surface of the `expweb` binary: configuration, the four command
//! pipelines, and report serialization. Kept as a library so integration
//! tests can drive the pipelines in-process.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_area, cmd_render, cmd_verify, cmd_web, to_stable_json, CommandOutcome, ConfigProblem,
};
pub use config::{FamilySpec, RunConfig};
