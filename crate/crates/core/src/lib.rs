//! Time-of-arrival probability distributions for one-dimensional quantum and
//! stochastic systems, in units with ħ = 1.
//!
//! The crossing surface is `x = 0`; states start on the left half-line.

pub mod copenhagen;
pub mod error;
pub mod histories;
pub mod numerics;
pub mod povm;
pub mod stochastic;
pub mod toa;

pub use error::{Result, ToaError};
pub use toa::ToaDistribution;
