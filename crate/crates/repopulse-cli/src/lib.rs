//! Implementation of the `repopulse` command-line pipeline.
//!
//! The binary in `main.rs` is a thin argument-parsing shell; everything it
//! does lives here so integration tests can drive commands and inspect
//! artifacts through the same code paths.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod synth;
