//! Stochastic dynamic programming under approximating probability measures.
//!
//! The crate solves finite- and infinite-horizon dynamic programming
//! equations on state grids when the outcome distribution is replaced by an
//! empirical (or quadrature) measure, and measures how the resulting value
//! functions converge using a numerical Attouch-Wets distance between
//! epigraphs.
//!
//! Module map:
//!
//! - [`measures`]: distributions, seeded sampling, empirical measures, tail
//!   expectations, AR(1) estimation and quadrature reference measures.
//! - [`valuefn`]: grid value functions, interpolation, convexity and saddle
//!   probes, epigraph distances.
//! - [`aw`]: the Attouch-Wets distance with an error budget.
//! - [`bellman`]: inner minimization, the Bellman operator, decision rules
//!   and tail diagnostics.
//! - [`solvers`]: backward recursion, value iteration, reference solutions
//!   and consistency sweeps.
//! - [`econ`]: the revenue, heavy-tailed price and log-AR(1) examples with
//!   their pointwise bound envelopes.

pub mod aw;
pub mod bellman;
pub mod econ;
mod error;
pub mod measures;
pub mod solvers;
pub mod valuefn;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, the precision used for every
/// CSV this crate writes.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}
