//! Numerical laboratory for lace-expansion quantities on ℤᵈ and finite tori.
//!
//! The crate covers the three step-distribution families (nearest-neighbor,
//! uniform spread-out, power-law spread-out), discrete Fourier machinery on
//! periodic boxes, random-walk Green's functions and the bubble/triangle
//! integrals, exact self-avoiding-walk enumeration with lace-coefficient
//! extraction, percolation and Ising simulations with brute-force oracles,
//! and numerical checks of the diagrammatic inequalities.

pub mod diagnostics;
pub mod error;
pub mod ising;
pub mod lattice;
pub mod percolation;
pub mod quadrature;
pub mod random_walk;
pub mod rng;
pub mod saw;
pub mod stats;
pub mod step_dist;
pub mod torus;

pub use error::{LabError, Result};
pub use lattice::PeriodicBox;
pub use step_dist::{Family, StepDistribution};
pub use torus::{Space, TorusField, TorusGrid};
