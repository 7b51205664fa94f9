//! Standard-cell delay and power prediction from routed layout geometry and
//! netlist topology.

pub mod config;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod netlist;
pub mod numcore;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
