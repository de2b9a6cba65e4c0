//! Equilibrium configurations of `N + 1` equal charges on a segment `[-L, 0]`
//! with nearest-neighbour Coulomb repulsion and an external force.
//!
//! * [`model`]: parameters, configurations, energy and fixed-point residuals.
//! * [`shooting`]: the unique fixed point for non-negative, non-increasing forces.
//! * [`closed_form`]: constant-force formulas, critical force and limiting densities.
//! * [`oracle`]: direct energy minimization, including multi-start search for
//!   non-monotone forces.
//! * [`analysis`]: histograms, phase detection, sweeps and convergence tables.
//! * [`cli`]: the `coulomb-chain` command line front end.

pub mod analysis;
pub mod cli;
pub mod closed_form;
pub mod error;
pub mod force;
pub mod model;
pub mod oracle;
pub mod shooting;

pub use error::{ModelError, Result};
pub use force::{ForceField, ForceProfile};
pub use model::{energy, is_fixed_point, residuals, Classification, Configuration, FixedPointResult, ModelParams, Residuals};
