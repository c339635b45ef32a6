pub mod corrector;
pub mod effective;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod metric;
pub mod numerics;
pub mod stats;
pub mod vector;

pub use error::{Error, Result};
