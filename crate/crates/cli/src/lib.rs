//! Configuration and orchestration for the `shapclust` command-line tool.

pub mod config;
pub mod pipeline;
