//! Bandit learning of stable matchings in two-sided markets where both sides
//! learn their preferences through interviews.

pub mod agents;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod firm;
pub mod harness;
pub mod hinted;
pub mod market;
pub mod metrics;
pub mod reward;

pub use error::{Error, Result, Side};
