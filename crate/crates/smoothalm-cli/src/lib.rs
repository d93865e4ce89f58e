//! Library surface of the experiment harness.
//!
//! The binary is a thin argument parser over [`commands`]; everything it can do is
//! callable in-process, which is how the integration and acceptance suites drive
//! the full pipeline deterministically.

pub mod commands;
pub mod config;
pub mod stats;
pub mod trace;
