//! Spectral element solver for potential-flow water waves in a vertical
//! slice: fully nonlinear or linearized free-surface dynamics over variable
//! bathymetry, with stream-function wave generation, relaxation-zone
//! forcing/absorption, and explicit fourth-order time stepping.
//!
//! The crate is organised to be driven either through the runnable examples
//! (`cargo run --example ...`, one per capability) or the thin `semwave`
//! binary, which exposes the same pipelines behind a config file.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod mesh;
pub mod output;
pub mod solver;
pub mod wavetheory;

pub use error::{Error, Result, Routine};
pub use cli::run_cli;
