//! Budget-constrained multi-agent contracts: equilibria of the effort game,
//! structural classification, Luce contract synthesis, principal
//! optimization and total-payment comparisons.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod luce;
pub mod maximal;
pub mod model;
pub mod numeric;
pub mod optimize;
pub mod payments;
pub mod sampling;

pub use error::{Error, Result};
