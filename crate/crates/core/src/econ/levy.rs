use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::revenue::RevenueModel;
use crate::bellman::{inner_min, StageModel, StorageCost};
use crate::measures::{DistributionSpec, EmpiricalMeasure, SampleStream};
use crate::solvers::{median, solve_infinite, SolveConfig};
use crate::valuefn::{Grid1D, StateGrid};
use crate::{fmt_f64, Error, Result};

/// Revenue optimization under Lévy(0,1) prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyConfig {
    pub nu_schedule: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `(inventory, price)` at which the next-state decision is recorded.
    pub probe: (f64, f64),
    pub beta: f64,
    pub storage: StorageCost,
    pub x_max: f64,
    pub knots: usize,
    /// Stopping tolerance relative to the envelope scale `max(C(x_max), E_ν[p]·x_max)/(1−β)`.
    pub vi_rel_tolerance: f64,
    pub vi_max_iters: usize,
}

impl Default for LevyConfig {
    fn default() -> Self {
        LevyConfig {
            nu_schedule: vec![10, 100, 1000, 10_000],
            seeds: vec![1, 2, 3, 4, 5],
            probe: (1.0, 1.0),
            beta: 0.99,
            storage: StorageCost::default(),
            x_max: 2.0,
            knots: 401,
            vi_rel_tolerance: 1e-10,
            vi_max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyRecord {
    pub nu: usize,
    pub seed: u64,
    /// `y_ν` at the probe.
    pub decision: f64,
    pub iterations: usize,
    pub residual: f64,
    pub error_bound: f64,
    pub converged: bool,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyOutcome {
    /// Sorted by `(nu, seed)`.
    pub records: Vec<LevyRecord>,
    /// `(ν, seed median of y_ν)`.
    pub medians: Vec<(usize, f64)>,
}

/// Solves the revenue problem for each (ν, seed) with the first ν Lévy draws
/// and records the decision at the probe.
///
/// There is no reference solution and no bound column: under Lévy prices the
/// true problem has no finite value.
pub fn levy_experiment(cfg: &LevyConfig) -> Result<LevyOutcome> {
    if cfg.nu_schedule.is_empty() || cfg.nu_schedule.windows(2).any(|w| w[0] >= w[1]) || cfg.nu_schedule[0] == 0 {
        return Err(Error::Parameter("the schedule must be positive and strictly increasing".into()));
    }
    if !(cfg.vi_rel_tolerance > 0.0) {
        return Err(Error::Parameter("vi_rel_tolerance must be positive".into()));
    }
    let model = RevenueModel::new(cfg.beta, cfg.storage)?;
    let grid = StateGrid::One(Grid1D::uniform(0.0, cfg.x_max, cfg.knots)?);
    let (px, pp) = cfg.probe;
    if !(0.0..=cfg.x_max).contains(&px) {
        return Err(Error::Domain(format!("probe inventory {px} is outside [0, {}]", cfg.x_max)));
    }
    let max_nu = *cfg.nu_schedule.last().expect("nonempty");
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let draws = SampleStream::new(seed, DistributionSpec::levy_standard()).sample(max_nu)?;
        for &nu in &cfg.nu_schedule {
            let start = Instant::now();
            let measure = EmpiricalMeasure::uniform(draws[..nu].to_vec())?;
            let scale = cfg.storage.eval(cfg.x_max).max(measure.mean() * cfg.x_max) / (1.0 - cfg.beta);
            let solve = SolveConfig {
                vi_tolerance: cfg.vi_rel_tolerance * scale.max(1.0),
                vi_max_iters: cfg.vi_max_iters,
                keep_policy: false,
            };
            let report = solve_infinite(&model, &measure, &grid, &solve)?;
            let (_, y) = inner_min(&model, report.value(), px, 0.0, pp)?;
            records.push(LevyRecord {
                nu,
                seed,
                decision: y,
                iterations: report.iterations,
                residual: report.residual,
                error_bound: report.error_bound,
                converged: report.converged,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    records.sort_by_key(|r| (r.nu, r.seed));
    let medians = cfg
        .nu_schedule
        .iter()
        .map(|&nu| {
            let ys: Vec<f64> = records.iter().filter(|r| r.nu == nu).map(|r| r.decision).collect();
            (nu, median(&ys).unwrap_or(f64::NAN))
        })
        .collect();
    Ok(LevyOutcome { records, medians })
}

/// `nu,seed,decision`.
pub fn fig1_csv(outcome: &LevyOutcome) -> String {
    let mut out = String::from("nu,seed,decision\n");
    for r in &outcome.records {
        out.push_str(&format!("{},{},{}\n", r.nu, r.seed, fmt_f64(r.decision)));
    }
    out
}

/// `nu,median_decision`.
pub fn fig1_median_csv(outcome: &LevyOutcome) -> String {
    let mut out = String::from("nu,median_decision\n");
    for (nu, m) in &outcome.medians {
        out.push_str(&format!("{},{}\n", nu, fmt_f64(*m)));
    }
    out
}

/// Discounted cost of never selling from inventory `x1`: every stage pays `C(x1)`
/// whatever the price, so the total is `C(x1)/(1−β)`.
pub fn hold_everything_value(model: &RevenueModel, x1: f64) -> f64 {
    // φ(x1, x1, p) does not depend on p; evaluate it at p = 0.
    model.stage_cost(x1, 0.0, x1, 0.0) / (1.0 - model.beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_value_is_fifty() {
        let m = RevenueModel::new(0.99, StorageCost::default()).unwrap();
        assert!((hold_everything_value(&m, 1.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn small_run_decisions_are_feasible() {
        let cfg = LevyConfig {
            nu_schedule: vec![5, 20],
            seeds: vec![7],
            knots: 41,
            beta: 0.9,
            ..LevyConfig::default()
        };
        let out = levy_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 2);
        for r in &out.records {
            assert!(r.converged);
            assert!((0.0..=1.0).contains(&r.decision));
        }
        assert!(fig1_csv(&out).starts_with("nu,seed,decision\n5,7,"));
    }
}
