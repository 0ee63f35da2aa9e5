pub mod error;
pub mod linalg;
pub mod operators;
pub mod problem;
pub mod secular;
pub mod linesearch;
pub mod solver;
pub mod compact;
pub mod scaphase;
pub mod scprime;
pub mod tuning;
pub mod scenario;
pub mod evaluate;
pub mod harness;

pub use error::{Error, Result};
