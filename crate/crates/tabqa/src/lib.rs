//! Std runtime for the `tabqa-core` agent.
//!
//! Provides the SQLite executor with its retry ladder, the script sidecar
//! client, HTTP / recording / replay completion backends, benchmark dataset
//! adapters, report generation and the `tabqa` command line.

pub mod backend;
pub mod bench;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod demos;
pub mod executor;
pub mod sidecar;
pub mod sql;
pub mod table_io;

pub use tabqa_core as core;
