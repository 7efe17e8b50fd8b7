//! Geometric-median vote aggregation and manipulability analysis.
//!
//! Voters report vectors in `R^d`; the aggregate is the (optionally skewed)
//! geometric median. The crate computes it with a certified error bound and
//! measures how much a single voter, or a minority coalition, can move it.

pub mod cli;
pub mod error;
pub mod median;
mod optim;
pub mod profile;
pub mod simulation;
pub mod skewness;
pub mod strategy;
pub mod vector_core;

pub use error::{Error, Result};
pub use median::{geometric_median, skewed_geometric_median, MedianResult, MedianSolver};
pub use profile::{VoterProfile, WeightedProfile};
pub use vector_core::{point, Point, SpdMatrix, ThirdDerivTensor};
