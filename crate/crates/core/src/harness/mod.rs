//! Configuration, orchestration and file outputs behind the `hfbeam` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Command, Overrides, RunConfig};
pub use run::{run, Manifest};
