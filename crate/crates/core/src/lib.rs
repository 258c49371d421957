pub mod airga;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod solvers;
pub mod system;
pub mod transfer;

pub use error::{Error, Result};
