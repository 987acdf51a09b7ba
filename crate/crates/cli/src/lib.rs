//! Config-driven experiment runner for `chaodiff`.
//!
//! Every command reads an [`config::ExperimentConfig`], validates it in full
//! before computing anything, and emits CSV tables with fixed headers.

pub mod commands;
pub mod config;
pub mod experiment;
