pub mod classify;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod nvmodel;

pub use error::{Error, Result};
