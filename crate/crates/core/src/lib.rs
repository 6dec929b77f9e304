pub mod cli;
pub mod config;
pub mod convergence;
pub mod dynamics;
pub mod eikonal;
pub mod error;
pub mod field;
pub mod nonlinearity;
pub mod transverse;

pub use error::{Error, Result};
