//! Distributions, seeded sampling and empirical measures.

mod ar1;
mod bl;
mod dist;
mod empirical;
mod normal;
mod quadrature;
mod stream;
mod sum;

pub use ar1::{ar1_ols_fit, ar1_ols_fit_with, ar1_simulate, Ar1Fit};
pub use bl::{bounded_lipschitz_distance, discrepancies, TestFamily, TestFunction};
pub use dist::{DistributionSpec, OutcomeSpace};
pub use empirical::{empirical_from_samples, EmpiricalMeasure};
pub use normal::inverse_normal_cdf;
pub use quadrature::{gauss_hermite, gauss_laguerre, gauss_legendre, quadrature_measure};
pub use stream::{derive_seed, SampleStream};
pub use sum::{compensated_sum, CompensatedSum};
