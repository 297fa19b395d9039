//! Spectral lattice simulation of second-order-in-time stochastic PDEs
//! `∂²u/∂t² + (-1)^k Δ^k u = α(u) Ḟ` driven by Gaussian noise that is white in time and
//! spatially homogeneous, together with the isometries and bounds used to verify it.

pub mod covariance;
pub mod error;
pub mod greens;
pub mod harness;
pub mod lattice;
pub mod noise;
pub mod quad;
pub mod solver;
pub mod stochint;
pub mod weighted;

pub use error::{Error, Result};
