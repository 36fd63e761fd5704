//! Component structure of dense random subgraphs of the hypercube.
//!
//! `Q_p^d` keeps each edge of the `d`-cube independently with probability
//! `p < 1/2`. This crate provides exact expectations per ambient-isomorphism
//! class, canonical forms and enumeration of small cube subgraphs,
//! Stein–Chen Poisson-approximation terms with a brute-force oracle, and a
//! seed-deterministic Monte Carlo census.

pub mod bitset;
pub mod canonical;
pub mod cli;
pub mod cube;
pub mod error;
pub mod expectations;
pub mod numeric;
pub mod par;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
