//! Command-line front end and multi-threaded runners for `bayes-lmm-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use bayes_lmm_core as core;
