pub mod carleman_check;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod pde_solver;
pub mod weight;

pub use error::{Error, Result};

/// Library version, recorded in experiment artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
