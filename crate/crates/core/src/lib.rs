//! Exact and certified computations for metric Diophantine approximation.
pub mod approx_sets;
pub mod certified;
pub mod contfrac;
pub mod error;
pub mod gcd_graph;
pub mod intervals;
pub mod numtheory;
pub mod serde_util;
pub use error::{Error, Result};
