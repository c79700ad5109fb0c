use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bounds::{ar1_bound_envelope, KappaFit};
use crate::aw::{aw_distance_2d, AwConfig, AwEstimate};
use crate::bellman::{CostProfile, StageModel, StorageCost};
use crate::measures::{
    ar1_ols_fit_with, ar1_simulate, bounded_lipschitz_distance, derive_seed, quadrature_measure, DistributionSpec,
    EmpiricalMeasure, SampleStream, TestFamily,
};
use crate::solvers::{solve_infinite, CellStatus, SolveConfig, REFERENCE_NODES};
use crate::valuefn::{local_lipschitz_2d, saddle_defect, Grid1D, Grid2D, StateGrid};
use crate::{fmt_f64, Error, Result};

/// Selling under log prices `ℓ_{t+1} = αℓ_t + ξ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1ModelSpec {
    #[serde(default)]
    pub storage: StorageCost,
    pub beta: f64,
    pub alpha: f64,
    pub noise: DistributionSpec,
    /// Log-price grid span; defaults to the stationary mean ± 6 standard deviations.
    #[serde(default)]
    pub ell_range: Option<(f64, f64)>,
}

impl Ar1ModelSpec {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.noise.validate()?;
        if !self.noise.has_finite_exp_moment() {
            return Err(Error::Parameter(format!("noise {} has no finite exponential moment", self.noise)));
        }
        if let Some((lo, hi)) = self.ell_range {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Parameter(format!("invalid log-price range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// `ell_range` if set, else `μ/(1−α) ± 6σ/√(1−α²)`.
    pub fn ell_range(&self) -> Result<(f64, f64)> {
        if let Some(r) = self.ell_range {
            return Ok(r);
        }
        let (mu, sd) = match (self.noise.mean(), self.noise.std_dev()) {
            (Some(m), Some(s)) => (m, s),
            _ => return Err(Error::Parameter(format!("noise {} has no finite variance", self.noise))),
        };
        let center = mu / (1.0 - self.alpha);
        let spread = 6.0 * sd / (1.0 - self.alpha * self.alpha).sqrt();
        // A degenerate noise still needs a nonempty span.
        let spread = spread.max(1e-6 * center.abs().max(1.0));
        Ok((center - spread, center + spread))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie strictly inside (0,1), got {alpha}")))
    }
}

/// `φ((x, ℓ), y, ξ) = C(y) − exp(αℓ + ξ)(x − y)` on `[0, x]`, next log price `αℓ + ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub beta: f64,
    pub storage: StorageCost,
    pub alpha: f64,
}

pub fn build_ar1_model(spec: &Ar1ModelSpec, alpha_override: Option<f64>) -> Result<Ar1Model> {
    spec.validate()?;
    if !(spec.beta > 0.0 && spec.beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie strictly inside (0,1), got {}", spec.beta)));
    }
    spec.storage.validate()?;
    let alpha = alpha_override.unwrap_or(spec.alpha);
    check_alpha(alpha)?;
    Ok(Ar1Model {
        beta: spec.beta,
        storage: spec.storage,
        alpha,
    })
}

impl StageModel for Ar1Model {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn feasible(&self, x: f64, _ell: f64, _xi: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Model(format!("inventory must be finite and ≥ 0, got {x}")));
        }
        Ok((0.0, x))
    }

    fn cost_profile(&self, x: f64, ell: f64, xi: f64) -> CostProfile {
        let p = (self.alpha * ell + xi).exp();
        CostProfile::quadratic(self.storage.quad, self.storage.lin + p, -p * x)
    }

    fn exogenous_transition(&self, ell: f64, xi: f64) -> Option<f64> {
        Some(self.alpha * ell + xi)
    }

    fn sell_down_price(&self, ell: f64, xi: f64) -> Option<f64> {
        Some((self.alpha * ell + xi).exp())
    }

    fn storage(&self) -> Option<StorageCost> {
        Some(self.storage)
    }
}

/// Simulate, estimate and solve for each (ν, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1ExperimentConfig {
    pub spec: Ar1ModelSpec,
    /// First log price of every simulated path.
    pub ell1: f64,
    pub nu_schedule: Vec<usize>,
    pub seeds: Vec<u64>,
    pub x_max: f64,
    pub n_x: usize,
    pub n_ell: usize,
    pub solve: SolveConfig,
    /// Distance to the reference solution; `None` skips the reference.
    pub aw: Option<AwConfig>,
    pub reference_nodes: usize,
    /// Size of the true-noise sample the residual measure is compared with.
    pub noise_reference_size: usize,
    pub residuals_include_intercept: bool,
    /// Radii of the local Lipschitz probes at `(x_max/2, center of the ℓ span)`.
    pub lipschitz_radii: Vec<f64>,
}

impl Default for Ar1ExperimentConfig {
    fn default() -> Self {
        Ar1ExperimentConfig {
            spec: Ar1ModelSpec {
                storage: StorageCost::default(),
                beta: 0.9,
                alpha: 0.8,
                noise: DistributionSpec::normal(0.0, 0.1),
                ell_range: None,
            },
            ell1: 0.0,
            nu_schedule: vec![100, 1000, 10_000],
            seeds: vec![1, 2, 3, 4, 5],
            x_max: 2.0,
            n_x: 101,
            n_ell: 61,
            solve: SolveConfig::default(),
            aw: Some(AwConfig::default_2d()),
            reference_nodes: REFERENCE_NODES,
            noise_reference_size: 100_000,
            residuals_include_intercept: false,
            lipschitz_radii: vec![0.4, 0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Record {
    pub nu: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub alpha_hat: f64,
    pub alpha_error: f64,
    /// Bounded-Lipschitz distance from the residual measure to a true-noise sample.
    pub bl_distance: f64,
    pub ell_range: (f64, f64),
    /// `(convexity defect in x, concavity defect in ℓ)`.
    pub saddle: (f64, f64),
    pub value_range: f64,
    pub min_bound_margin: f64,
    pub max_series_ratio: f64,
    pub aw_to_ref: Option<AwEstimate>,
    pub iterations: usize,
    pub residual: f64,
    pub error_bound: f64,
    pub clip_events: usize,
    /// `(radius, constant)` pairs.
    pub local_lipschitz: Vec<(f64, f64)>,
    pub wall_seconds: f64,
}

/// Log-price span for a fitted law: the configured span joined with the
/// interval `[min ξ, max ξ]/(1−α)` that the transition maps into itself.
///
/// On such a span no transition leaves the grid, so the solved function keeps
/// its concavity in ℓ.
fn cell_ell_range(base: (f64, f64), alpha: f64, noise: &EmpiricalMeasure) -> (f64, f64) {
    let (lo, hi) = noise.support();
    let (ilo, ihi) = (lo / (1.0 - alpha), hi / (1.0 - alpha));
    let pad = 1e-9 * ilo.abs().max(ihi.abs()).max(1.0);
    (base.0.min(ilo - pad), base.1.max(ihi + pad))
}

/// AR(1) consistency experiment; see [`Ar1ExperimentConfig`].
///
/// The bound envelope uses the fits on every schedule prefix up to ν. Cells
/// that fail are recorded with their error.
pub fn ar1_experiment(cfg: &Ar1ExperimentConfig) -> Result<Vec<Ar1Record>> {
    cfg.spec.validate()?;
    cfg.solve.validate()?;
    if cfg.nu_schedule.is_empty() || cfg.nu_schedule.windows(2).any(|w| w[0] >= w[1]) || cfg.nu_schedule[0] < 2 {
        return Err(Error::Parameter("the schedule must be strictly increasing with ν ≥ 2".into()));
    }
    let base_range = cfg.spec.ell_range()?;
    let max_nu = *cfg.nu_schedule.last().expect("nonempty");
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let path = ar1_simulate(cfg.spec.alpha, cfg.ell1, &cfg.spec.noise, max_nu, seed)?;
        let true_noise = SampleStream::new(derive_seed(seed, 1), cfg.spec.noise.clone()).sample(cfg.noise_reference_size)?;
        let true_noise = EmpiricalMeasure::uniform(true_noise)?;
        let mut fits = Vec::new();
        for &nu in &cfg.nu_schedule {
            let start = Instant::now();
            let rec = ar1_fit(&path[..=nu], cfg.residuals_include_intercept).and_then(|fit| {
                fits.push(fit.clone());
                ar1_cell(cfg, base_range, &fits, &true_noise, nu, seed)
            });
            let mut rec = rec.unwrap_or_else(|e| failed(nu, seed, &e));
            rec.wall_seconds = start.elapsed().as_secs_f64();
            records.push(rec);
        }
    }
    records.sort_by_key(|r| (r.nu, r.seed));
    Ok(records)
}

fn ar1_fit(prices: &[f64], include_intercept: bool) -> Result<KappaFit> {
    let fit = ar1_ols_fit_with(prices, include_intercept)?;
    Ok(KappaFit {
        kappa: fit.n,
        alpha: fit.alpha_hat,
        noise: fit.residuals,
    })
}

fn failed(nu: usize, seed: u64, e: &Error) -> Ar1Record {
    Ar1Record {
        nu,
        seed,
        status: CellStatus::Failed(e.to_string()),
        alpha_hat: f64::NAN,
        alpha_error: f64::NAN,
        bl_distance: f64::NAN,
        ell_range: (f64::NAN, f64::NAN),
        saddle: (f64::NAN, f64::NAN),
        value_range: f64::NAN,
        min_bound_margin: f64::NAN,
        max_series_ratio: f64::NAN,
        aw_to_ref: None,
        iterations: 0,
        residual: f64::NAN,
        error_bound: f64::NAN,
        clip_events: 0,
        local_lipschitz: Vec::new(),
        wall_seconds: 0.0,
    }
}

fn ar1_cell(
    cfg: &Ar1ExperimentConfig,
    base_range: (f64, f64),
    fits: &[KappaFit],
    true_noise: &EmpiricalMeasure,
    nu: usize,
    seed: u64,
) -> Result<Ar1Record> {
    let fit = fits.last().expect("current fit");
    let model = build_ar1_model(&cfg.spec, Some(fit.alpha))?;
    let ell_range = cell_ell_range(base_range, fit.alpha, &fit.noise);
    let grid = Grid2D {
        x: Grid1D::uniform(0.0, cfg.x_max, cfg.n_x)?,
        ell: Grid1D::uniform(ell_range.0, ell_range.1, cfg.n_ell)?,
    };
    let state_grid = StateGrid::Two(grid.clone());
    let report = solve_infinite(&model, &fit.noise, &state_grid, &cfg.solve)?;
    let v = report.value();
    let f = v.as_2d().expect("2D solve");
    let saddle = saddle_defect(f);
    let (vmin, vmax) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let envelope = ar1_bound_envelope(cfg.spec.beta, cfg.spec.storage, fits, grid.ell.knots())?;
    let check = envelope.check(v)?;
    let bl_distance = bounded_lipschitz_distance(&fit.noise, true_noise, &TestFamily::default_for(&fit.noise, true_noise))?;
    let aw_to_ref = match &cfg.aw {
        Some(aw) => {
            let truth = build_ar1_model(&cfg.spec, None)?;
            let quad = quadrature_measure(&cfg.spec.noise, cfg.reference_nodes)?;
            let reference = solve_infinite(&truth, &quad, &state_grid, &cfg.solve)?;
            let r = reference.value().as_2d().expect("2D solve");
            Some(aw_distance_2d(f, r, aw)?)
        }
        None => None,
    };
    let center = (0.5 * cfg.x_max, 0.5 * (ell_range.0 + ell_range.1));
    let local_lipschitz = cfg
        .lipschitz_radii
        .iter()
        .map(|&r| (r, local_lipschitz_2d(f, center.0, center.1, r)))
        .collect();
    Ok(Ar1Record {
        nu,
        seed,
        status: if report.converged {
            CellStatus::Ok
        } else {
            CellStatus::NotConverged
        },
        alpha_hat: fit.alpha,
        alpha_error: (fit.alpha - cfg.spec.alpha).abs(),
        bl_distance,
        ell_range,
        saddle,
        value_range: vmax - vmin,
        min_bound_margin: check.min_margin,
        max_series_ratio: envelope.max_series_ratio(),
        aw_to_ref,
        iterations: report.iterations,
        residual: report.residual,
        error_bound: report.error_bound,
        clip_events: report.clip_events,
        local_lipschitz,
        wall_seconds: 0.0,
    })
}

/// One row per cell: `nu,seed,status,alpha_hat,alpha_error,bl_distance,ell_min,ell_max,saddle_x,saddle_ell,value_range,min_bound_margin,max_series_ratio,aw_to_ref,iterations,residual,clip_events`.
pub fn ar1_csv(records: &[Ar1Record]) -> String {
    let mut out = String::from(
        "nu,seed,status,alpha_hat,alpha_error,bl_distance,ell_min,ell_max,saddle_x,saddle_ell,value_range,\
         min_bound_margin,max_series_ratio,aw_to_ref,iterations,residual,clip_events\n",
    );
    for r in records {
        let status = match &r.status {
            CellStatus::Failed(_) => "failed".to_string(),
            s => s.to_string(),
        };
        let nums = [
            r.alpha_hat,
            r.alpha_error,
            r.bl_distance,
            r.ell_range.0,
            r.ell_range.1,
            r.saddle.0,
            r.saddle.1,
            r.value_range,
            r.min_bound_margin,
            r.max_series_ratio,
        ];
        out.push_str(&format!("{},{},{}", r.nu, r.seed, status));
        for v in nums {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            r.aw_to_ref.map(|a| fmt_f64(a.value)).unwrap_or_default(),
            r.iterations,
            fmt_f64(r.residual),
            r.clip_events
        ));
    }
    out
}
