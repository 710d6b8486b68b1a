//! Numerical laboratory for multi-species fractional cross-diffusion systems
//! and the moderately interacting particle systems that approximate them.
//!
//! The crate has three layers:
//!
//! * discrete fractional calculus on a periodic grid ([`grid`], [`field`],
//!   [`frac_ops`]) together with the Gaussian mollifier kernels that couple
//!   particles to fields ([`kernels`]);
//! * dynamics: a pseudo-spectral solver for the continuum system ([`pde`]),
//!   an Euler-Maruyama integrator for the particle system driven by
//!   rotationally invariant stable noise ([`particles`], [`levy`]);
//! * instrumentation: trajectory norms and a bounded-Lipschitz probe
//!   ([`metrics`]) plus reproducible experiment drivers ([`harness`]).
//!
//! All stochastic output is a pure function of a master seed; see [`rng`].

pub mod error;
pub mod field;
pub mod frac_ops;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod levy;
pub mod metrics;
pub mod params;
pub mod particles;
pub mod pde;
pub mod quad;
pub mod rng;

mod spectral;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::PeriodicGrid;
pub use params::{ModelParams, ScalingParams};
