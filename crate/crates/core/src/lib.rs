pub mod error;
pub mod experiments;
pub mod flows;
pub mod lattice;
pub mod potential;
pub mod solver;
pub mod variational;
pub mod walk;

pub use error::{Error, Result};
