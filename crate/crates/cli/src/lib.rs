//! Command implementations behind the `lanemap` binary.

pub mod commands;
pub mod config;
