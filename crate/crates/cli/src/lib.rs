//! Library surface of the `millmon` CLI: the declarative run configuration
//! and the end-to-end pipeline orchestrator.

pub mod config;
pub mod pipeline;
