pub mod adapt;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod fe;
pub mod io;
pub mod mesh;
pub mod problem;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
