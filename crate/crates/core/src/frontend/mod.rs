//! File formats, text DSL, DOT emission, and the command-line interface.

pub mod cli;
pub mod dot;
pub mod dsl;
pub mod format;
