pub mod ablation;
pub mod checkpoint;
pub mod condenser;
pub mod config;
pub mod data;
pub mod disc;
pub mod error;
pub mod generator;
pub mod inference;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod model;
pub mod prob;
pub mod train;
mod weights;

pub use error::{Error, Result};
