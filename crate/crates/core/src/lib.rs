//! Exact simulation, disagreement coupling and Poisson approximation bounds
//! for finite Gibbs point processes given by a Papangelou intensity.

pub mod approx;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod models;
pub mod qmc;
pub mod rng;
pub mod samplers;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{MarkKind, MarkSpec, Point, RadiusLaw, Window};
pub use rng::StreamSeed;
pub use space::{PointConfig, Relation};
