//! Smallest-singular-value experiments for random rectangular matrices with
//! independent, non-identically distributed entries.

pub mod anticoncentration;
pub mod bkappa;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod par;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use rng::Stream;
