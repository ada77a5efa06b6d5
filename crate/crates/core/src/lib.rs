//! Phase-change thermal energy storage models built on a graph-based
//! thermal network: an n-section fixed-grid reference model and a six-state
//! switched moving-boundary model, plus the integrator, metrics and
//! scenario harness used to compare them.

pub mod error;
pub mod fg;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod mb;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod thermo;

pub use error::{Result, TesError};
