//! Economic instantiations: revenue optimization with storage costs, the
//! heavy-tailed (Lévy) price counterexample and the log-AR(1) price model,
//! with their pointwise value bounds.

mod ar1;
mod bounds;
mod levy;
mod revenue;

pub use ar1::{ar1_csv, ar1_experiment, build_ar1_model, Ar1ExperimentConfig, Ar1Model, Ar1ModelSpec, Ar1Record};
pub use bounds::{ar1_bound_envelope, revenue_bound_envelope, BoundCheck, BoundEnvelope, BoundRow, KappaFit, SeriesTerms};
pub use levy::{fig1_csv, fig1_median_csv, hold_everything_value, levy_experiment, LevyConfig, LevyOutcome, LevyRecord};
pub use revenue::{build_revenue_model, RevenueFamily, RevenueModel, RevenueModelSpec};
