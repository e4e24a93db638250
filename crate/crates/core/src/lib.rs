pub mod cli;
pub mod error;
pub mod eval;
pub mod exact;
pub mod experiment;
pub mod fcl;
pub mod graph;
pub mod io;
pub mod model;
pub mod quantum;
pub mod reproduce;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
