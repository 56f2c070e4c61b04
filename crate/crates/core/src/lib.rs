//! Late-lumping boundary feedback and observer design for a 1-D hyperbolic
//! boundary-control system.
//!
//! The crate synthesizes the exactly realizable boundary part of a feedback
//! (or output injection), approximates the bounded remainder by a finite
//! modal sum, and checks how close the resulting closed-loop spectrum gets
//! to the prescribed target spectrum. A method-of-characteristics simulator
//! cross-checks the spectral predictions in the time domain.
//!
//! Module map:
//!
//! * [`quadrature`], [`state`], [`eigen`]: state functions, inner products and
//!   biorthonormal eigenpairs.
//! * [`roots`]: argument-principle root isolation for entire functions.
//! * [`plant`]: the concrete plant, its characteristic functions and
//!   closed-form eigenfunctions.
//! * [`target`]: delay-ODE target dynamics and assumption checks.
//! * [`feedback`], [`observer`]: modal gain synthesis and closed-loop spectra.
//! * [`convergence`]: disk families and spectral convergence verification.
//! * [`simulation`]: time-domain validation.
//! * [`config`], [`report`]: run configuration and artifact emission.

pub mod config;
pub mod convergence;
pub mod eigen;
pub mod error;
pub mod feedback;
pub mod linalg;
pub mod observer;
pub mod plant;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod simulation;
pub mod state;
pub mod target;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;
