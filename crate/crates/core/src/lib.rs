//! Cut metrics for probability distributions on discrete cubes.

pub mod cutnorm;
pub mod distance;
pub mod error;
pub mod kernel;
pub mod io;
pub mod law;
pub mod lp;
pub mod measure;
pub mod models;
pub mod pinning;
pub mod rng;
pub mod sampling;

pub use error::{CutError, Result};
