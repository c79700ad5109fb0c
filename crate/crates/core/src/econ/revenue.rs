use serde::{Deserialize, Serialize};

use super::bounds::revenue_bound_envelope;
use crate::bellman::{CostProfile, StageModel, StorageCost};
use crate::measures::{DistributionSpec, EmpiricalMeasure};
use crate::solvers::ModelFamily;
use crate::valuefn::ValueFn;
use crate::{Error, Result};

/// Selling a stock `x` at price `p` while paying `C(y)` on what is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueModelSpec {
    #[serde(default)]
    pub storage: StorageCost,
    pub beta: f64,
    pub price: DistributionSpec,
    /// Initial inventory.
    pub x1: f64,
}

/// `φ(x, y, p) = C(y) − p(x − y)` on `[0, x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueModel {
    pub beta: f64,
    pub storage: StorageCost,
}

impl RevenueModel {
    pub fn new(beta: f64, storage: StorageCost) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Parameter(format!("beta must lie strictly inside (0,1), got {beta}")));
        }
        storage.validate()?;
        Ok(RevenueModel { beta, storage })
    }
}

pub fn build_revenue_model(spec: &RevenueModelSpec) -> Result<RevenueModel> {
    spec.price.validate()?;
    if !(spec.x1 >= 0.0 && spec.x1.is_finite()) {
        return Err(Error::Parameter(format!("initial inventory must be finite and ≥ 0, got {}", spec.x1)));
    }
    RevenueModel::new(spec.beta, spec.storage)
}

impl StageModel for RevenueModel {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn feasible(&self, x: f64, _ell: f64, _p: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Model(format!("inventory must be finite and ≥ 0, got {x}")));
        }
        Ok((0.0, x))
    }

    fn cost_profile(&self, x: f64, _ell: f64, p: f64) -> CostProfile {
        CostProfile::quadratic(self.storage.quad, self.storage.lin + p, -p * x)
    }

    fn sell_down_price(&self, _ell: f64, p: f64) -> Option<f64> {
        Some(p)
    }

    fn storage(&self) -> Option<StorageCost> {
        Some(self.storage)
    }
}

/// The revenue model for every ν, with its bound envelope as the margin check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueFamily(pub RevenueModel);

impl ModelFamily for RevenueFamily {
    type Model = RevenueModel;

    fn model(&self, _nu: Option<usize>) -> Result<RevenueModel> {
        Ok(self.0)
    }

    fn bound_margin(&self, prefixes: &[EmpiricalMeasure], v: &ValueFn) -> Result<Option<f64>> {
        let env = revenue_bound_envelope(self.0.beta, self.0.storage, prefixes)?;
        Ok(Some(env.check(v)?.min_margin))
    }
}
