pub mod balance;
pub mod cli;
pub mod dist;
pub mod error;
pub mod lattice;
pub mod maps;
pub mod matrix;
pub mod quad;
pub mod report;
pub mod rng;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
