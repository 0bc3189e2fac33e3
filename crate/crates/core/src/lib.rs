pub mod classify;
pub mod error;
pub mod exec;
pub mod gauss;
pub mod noise;
pub mod hidden;
pub mod io;
pub mod sq;
pub mod univariate;

pub use error::{Error, Result};
pub use exec::Execution;
