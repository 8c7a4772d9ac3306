//! Library side of the `mhi` command-line tool.

pub mod app;
pub mod commands;
pub mod diagnostics;
pub mod synth;
