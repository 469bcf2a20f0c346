pub mod cli;
pub mod dynamics;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod factorization;
pub mod graph;
pub mod model;
pub mod sampling;
pub mod rng;

pub use error::{Error, Result};
