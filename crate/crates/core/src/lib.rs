//! Numerical companions to a statistical-learning-theory toolchain.
//!
//! The crate computes the objects that appear in covering-number and chaining
//! arguments (nets, entropy profiles, entropy integrals, dyadic net
//! hierarchies) and checks the inequalities built on top of them, either
//! exactly by enumeration on finite product spaces or by seeded Monte Carlo:
//!
//! * [`metric`]: ε-nets, packings, covering numbers, metric entropy, entropy
//!   integrals and the Euclidean-ball covering bound.
//! * [`discrete_exact`]: Efron–Stein, entropy duality, tensorization, Han's
//!   inequality and the Bernoulli log-Sobolev inequality by exact summation.
//! * [`gaussian_mc`]: Poincaré, Gaussian log-Sobolev, Herbst CGF, Lipschitz
//!   tails, finite maxima and 1-D mollification.
//! * [`chaining`]: dyadic nets, recursive projections and Dudley's bound for
//!   the canonical Gaussian process.
//! * [`regression`]: localized least squares, critical radii, the master
//!   error bound and the linear / ℓ1 rate experiments.
//! * [`maurey`]: Maurey's empirical method for ℓ1-hull images.
//!
//! Every stochastic routine takes a 64-bit seed; see [`rng`] for how
//! substreams are derived.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaining;
pub mod discrete_exact;
pub mod error;
pub mod gaussian_mc;
pub mod io;
pub mod linalg;
pub mod maurey;
pub mod metric;
pub mod regression;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use stats::McEstimate;
