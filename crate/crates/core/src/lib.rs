//! Direct-effect estimation for randomized experiments on networks by
//! almost-exact matching on neighborhood subgraph counts.

pub mod baselines;
pub mod census;
pub mod error;
pub mod flame;
pub mod graph;
pub mod interference;
pub mod io;
pub mod sim;

pub use error::{Error, Result};
