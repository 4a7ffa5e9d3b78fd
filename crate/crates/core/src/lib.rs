//! Numerical core for calibrated-geometry computations on cones.
//!
//! * [`exterior`]: constant-coefficient forms, simple m-vectors and metrics.
//! * [`comass`]: comass by Grassmannian ascent, with brute-force and
//!   analytic oracles, plus the canonical decomposition of a form along a
//!   calibrated plane and the adapted metric built from it.
//! * [`gluing`]: comass control along the segment of metrics
//!   `(1−s)g₁ + s g₂`.
//! * [`lawlor`]: the profile inequality, fastest-descent ODE and vanishing
//!   angles behind Lawlor's curvature criterion.
//! * [`product`]: minimal products of sphere links and their numerically
//!   estimated curvature data and normal radius.
//! * [`obstruction`]: Gauss images, hemisphere certificates and the
//!   wedge-comass bound.
//! * [`io`]: structured-text file formats.

pub mod comass;
pub mod error;
pub mod exterior;
pub mod gluing;
pub mod io;
pub mod lawlor;
pub mod linalg;
pub mod obstruction;
pub mod product;
pub mod rng;

pub use error::{Error, Result};
