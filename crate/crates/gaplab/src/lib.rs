//! Numerical laboratory for the fundamental spectral gap of Dirichlet
//! Schrodinger operators on thin convex domains in negatively curved surfaces.
//!
//! The library builds Fermi-coordinate metrics from prescribed curvature
//! profiles, discretizes the Laplace-Beltrami operator on thin rescaled
//! domains, and compares its low spectrum against a one-dimensional model
//! operator whose eigenvalues are Airy-function shifts.  On top of that sit
//! certified eigenvalue localization, two-norm perturbation sandwiches, and
//! gap experiments that probe how a convex cubic potential moves the gap.

// Guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0` they treat
// NaN as a failure.  Reference constants keep their full published digits.
// Indexed loops with neighbor access are the house style in the stencil and
// banded kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

pub mod airy;
pub mod cli;
pub mod config;
pub mod cross_section;
pub mod error;
pub mod gap_experiments;
pub mod geometry;
pub mod linalg;
pub mod perturbation;
pub mod spectral2d;
pub mod sturm_liouville;
pub mod tolerances;

pub use error::{Error, Result};
