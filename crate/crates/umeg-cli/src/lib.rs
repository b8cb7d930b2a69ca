//! Library side of the `umeg` CLI: configuration, run orchestration, and
//! plot emission. The binary in `main.rs` is a thin argument parser over
//! these functions, which keeps every command equally callable from tests.

pub mod config;
pub mod plot;
pub mod runner;
