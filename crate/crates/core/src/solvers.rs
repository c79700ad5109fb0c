//! Backward recursion for finite horizons, value iteration for the infinite
//! horizon, quadrature reference solutions and sweeps over the sample size ν.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aw::{aw_distance, aw_distance_2d, AwConfig, AwEstimate};
use crate::bellman::{apply_bellman_full, inner_min, tail_diagnostics, DecisionTable, StageModel, TailDiagnostic};
use crate::measures::{quadrature_measure, DistributionSpec, EmpiricalMeasure, SampleStream};
use crate::valuefn::{StateGrid, ValueFn};
use crate::{fmt_f64, Error, Result};

/// Stopping rule and bookkeeping for the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Sup-norm distance between successive iterates at which value iteration stops.
    pub vi_tolerance: f64,
    pub vi_max_iters: usize,
    /// Extract decision tables alongside the values.
    pub keep_policy: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            vi_tolerance: 1e-8,
            vi_max_iters: 10_000,
            keep_policy: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vi_tolerance > 0.0 && self.vi_tolerance.is_finite()) {
            return Err(Error::Parameter(format!("vi_tolerance must be positive, got {}", self.vi_tolerance)));
        }
        if self.vi_max_iters == 0 {
            return Err(Error::Parameter("vi_max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Finite horizon: `V^1, …, V^T, V^{T+1} = 0`. Infinite horizon: the single iterate returned.
    pub values: Vec<ValueFn>,
    /// Finite horizon: one table per stage. Infinite horizon: the decisions at the returned iterate.
    pub policies: Vec<DecisionTable>,
    /// Sup-norm change made by the last operator application (0 for finite horizons).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `β/(1−β)·residual`, a certified sup-norm distance to the grid fixed point.
    pub error_bound: f64,
    pub residual_history: Vec<f64>,
    /// Clip events of the last operator application (2D only).
    pub clip_events: usize,
}

impl SolveReport {
    /// `V^1` for finite horizons, the fixed-point iterate otherwise.
    pub fn value(&self) -> &ValueFn {
        &self.values[0]
    }
}

/// Backward recursion `V^t = B_t(V^{t+1})` from `V^{T+1} = 0`, with one
/// measure per stage (`measures[t-1]` for stage `t`).
pub fn solve_finite<M: StageModel + ?Sized>(
    model: &M,
    measures: &[EmpiricalMeasure],
    grid: &StateGrid,
    keep_policy: bool,
) -> Result<SolveReport> {
    let horizon = measures.len();
    if horizon == 0 {
        return Err(Error::Parameter("the horizon must be at least 1".into()));
    }
    let mut values = vec![grid.zeros()];
    let mut policies = Vec::new();
    let mut clip_events = 0;
    for t in (1..=horizon).rev() {
        let next = values.last().expect("terminal value present");
        let out = apply_bellman_full(model, next, &measures[t - 1], keep_policy).map_err(|e| Error::Stage {
            stage: t,
            source: Box::new(e),
        })?;
        clip_events += out.clip_events;
        if let Some(p) = out.policy {
            policies.push(p);
        }
        values.push(out.value);
    }
    values.reverse();
    policies.reverse();
    Ok(SolveReport {
        values,
        policies,
        residual: 0.0,
        iterations: horizon,
        converged: true,
        error_bound: 0.0,
        residual_history: Vec::new(),
        clip_events,
    })
}

/// Value iteration from `V₀ ≡ 0`.
pub fn solve_infinite<M: StageModel + ?Sized>(
    model: &M,
    measure: &EmpiricalMeasure,
    grid: &StateGrid,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    solve_infinite_from(model, measure, grid.zeros(), cfg)
}

/// Value iteration from a given start.
///
/// Running out of iterations is not an error: the report carries the last
/// iterate with `converged = false`.
pub fn solve_infinite_from<M: StageModel + ?Sized>(
    model: &M,
    measure: &EmpiricalMeasure,
    start: ValueFn,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let beta = model.beta();
    let mut v = start;
    let mut history = Vec::new();
    let mut converged = false;
    let mut clip_events = 0;
    while history.len() < cfg.vi_max_iters {
        let out = apply_bellman_full(model, &v, measure, false)?;
        let r = out.value.sup_norm_diff(&v)?;
        history.push(r);
        clip_events = out.clip_events;
        v = out.value;
        if r <= cfg.vi_tolerance {
            converged = true;
            break;
        }
    }
    let residual = *history.last().expect("at least one iteration");
    let policies = if cfg.keep_policy {
        vec![apply_bellman_full(model, &v, measure, true)?
            .policy
            .expect("policy requested")]
    } else {
        Vec::new()
    };
    Ok(SolveReport {
        values: vec![v],
        policies,
        residual,
        iterations: history.len(),
        converged,
        error_bound: beta / (1.0 - beta) * residual,
        residual_history: history,
        clip_events,
    })
}

/// Default number of quadrature nodes for reference measures.
pub const REFERENCE_NODES: usize = 64;

/// Infinite-horizon solution under a quadrature discretization of `truth`.
///
/// Lévy prices are refused: the true problem has no finite value.
pub fn reference_solution<M: StageModel + ?Sized>(
    model: &M,
    truth: &DistributionSpec,
    nodes: usize,
    grid: &StateGrid,
    cfg: &SolveConfig,
) -> Result<(SolveReport, EmpiricalMeasure)> {
    let measure = quadrature_measure(truth, nodes)?;
    let report = solve_infinite(model, &measure, grid, cfg)?;
    Ok((report, measure))
}

/// A family of models indexed by the sample size.
pub trait ModelFamily: Sync {
    type Model: StageModel;

    /// The model used with ν samples, or the reference model for `None`.
    fn model(&self, nu: Option<usize>) -> Result<Self::Model>;

    /// Smallest slack of the bound envelope at the knots of `v`.
    ///
    /// `prefixes` are the empirical measures of every schedule entry up to and
    /// including the current ν.
    fn bound_margin(&self, _prefixes: &[EmpiricalMeasure], _v: &ValueFn) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Truncated-expectation diagnostics to record in every sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRequest {
    pub probe: (f64, f64),
    pub alpha_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub nu_schedule: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid: StateGrid,
    pub solve: SolveConfig,
    /// Distance to the reference; `None` skips the reference solve.
    pub aw: Option<AwConfig>,
    pub reference_nodes: usize,
    /// `(x, ell, ξ)` states at which the decision is recorded.
    pub decision_probes: Vec<(f64, f64, f64)>,
    pub tail: Option<TailRequest>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.solve.validate()?;
        if self.nu_schedule.is_empty() || self.nu_schedule[0] == 0 {
            return Err(Error::Parameter("the schedule needs positive sample sizes".into()));
        }
        if self.nu_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("the schedule must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    NotConverged,
    Failed(String),
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellStatus::Ok => f.write_str("ok"),
            CellStatus::NotConverged => f.write_str("not_converged"),
            CellStatus::Failed(e) => write!(f, "failed: {e}"),
        }
    }
}

/// Outcome of one (ν, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRecord {
    pub nu: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub aw_to_ref: Option<AwEstimate>,
    pub decisions: Vec<f64>,
    pub min_bound_margin: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub error_bound: f64,
    pub clip_events: usize,
    pub tails: Vec<TailDiagnostic>,
    pub value: Option<ValueFn>,
    pub wall_seconds: f64,
}

impl ConsistencyRecord {
    fn failed(nu: usize, seed: u64, e: &Error) -> Self {
        ConsistencyRecord {
            nu,
            seed,
            status: CellStatus::Failed(e.to_string()),
            aw_to_ref: None,
            decisions: Vec::new(),
            min_bound_margin: None,
            iterations: 0,
            residual: f64::NAN,
            error_bound: f64::NAN,
            clip_events: 0,
            tails: Vec::new(),
            value: None,
            wall_seconds: 0.0,
        }
    }
}

/// AW distance between two value functions of the same dimension.
pub fn value_distance(f: &ValueFn, g: &ValueFn, cfg: &AwConfig) -> Result<AwEstimate> {
    match (f, g) {
        (ValueFn::One(a), ValueFn::One(b)) => aw_distance(a, b, cfg),
        (ValueFn::Two(a), ValueFn::Two(b)) => aw_distance_2d(a, b, cfg),
        _ => Err(Error::Shape("cannot compare 1D and 2D value functions".into())),
    }
}

/// Solves every (ν, seed) cell with the empirical measure of the first ν
/// draws of `truth` and compares each solution with the quadrature reference.
///
/// Draws are nested: for one seed the ν-sample measure is a prefix of every
/// larger one. A cell that fails is recorded with its error and the sweep goes on.
pub fn consistency_sweep<F: ModelFamily>(
    family: &F,
    truth: &DistributionSpec,
    cfg: &SweepConfig,
) -> Result<Vec<ConsistencyRecord>> {
    cfg.validate()?;
    let reference = match &cfg.aw {
        Some(_) => {
            let model = family.model(None)?;
            let (report, _) = reference_solution(&model, truth, cfg.reference_nodes, &cfg.grid, &cfg.solve)?;
            Some(report.values.into_iter().next().expect("one value"))
        }
        None => None,
    };
    let max_nu = *cfg.nu_schedule.last().expect("nonempty schedule");
    let mut records = Vec::with_capacity(cfg.nu_schedule.len() * cfg.seeds.len());
    for &seed in &cfg.seeds {
        let draws = SampleStream::new(seed, truth.clone()).sample(max_nu)?;
        let prefixes: Vec<EmpiricalMeasure> = cfg
            .nu_schedule
            .iter()
            .map(|&n| EmpiricalMeasure::uniform(draws[..n].to_vec()))
            .collect::<Result<_>>()?;
        for (idx, &nu) in cfg.nu_schedule.iter().enumerate() {
            let start = Instant::now();
            let mut record = run_cell(family, cfg, reference.as_ref(), &prefixes[..=idx], nu, seed)
                .unwrap_or_else(|e| ConsistencyRecord::failed(nu, seed, &e));
            record.wall_seconds = start.elapsed().as_secs_f64();
            records.push(record);
        }
    }
    records.sort_by_key(|r| (r.nu, r.seed));
    Ok(records)
}

fn run_cell<F: ModelFamily>(
    family: &F,
    cfg: &SweepConfig,
    reference: Option<&ValueFn>,
    prefixes: &[EmpiricalMeasure],
    nu: usize,
    seed: u64,
) -> Result<ConsistencyRecord> {
    let model = family.model(Some(nu))?;
    let measure = prefixes.last().expect("current measure");
    let report = solve_infinite(&model, measure, &cfg.grid, &cfg.solve)?;
    let v = report.value();
    let aw_to_ref = match (reference, &cfg.aw) {
        (Some(r), Some(aw)) => Some(value_distance(v, r, aw)?),
        _ => None,
    };
    let decisions = cfg
        .decision_probes
        .iter()
        .map(|&(x, ell, xi)| inner_min(&model, v, x, ell, xi).map(|(_, y)| y))
        .collect::<Result<Vec<f64>>>()?;
    let min_bound_margin = family.bound_margin(prefixes, v)?;
    let tails = match &cfg.tail {
        Some(t) => tail_diagnostics(&model, v, measure, &[t.probe], &t.alpha_grid)?,
        None => Vec::new(),
    };
    Ok(ConsistencyRecord {
        nu,
        seed,
        status: if report.converged {
            CellStatus::Ok
        } else {
            CellStatus::NotConverged
        },
        aw_to_ref,
        decisions,
        min_bound_margin,
        iterations: report.iterations,
        residual: report.residual,
        error_bound: report.error_bound,
        clip_events: report.clip_events,
        tails,
        value: Some(report.values.into_iter().next().expect("one value")),
        wall_seconds: 0.0,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Sweep table with header `nu,seed,aw_to_ref,decision_probe_1..k,min_bound_margin,iterations,residual,clip_events`.
///
/// Missing quantities are left empty.
pub fn sweep_csv(records: &[ConsistencyRecord]) -> String {
    let k = records.iter().map(|r| r.decisions.len()).max().unwrap_or(0);
    let mut out = String::from("nu,seed,aw_to_ref");
    for i in 1..=k {
        out.push_str(&format!(",decision_probe_{i}"));
    }
    out.push_str(",min_bound_margin,iterations,residual,clip_events\n");
    for r in records {
        out.push_str(&format!("{},{},{}", r.nu, r.seed, opt(r.aw_to_ref.map(|a| a.value))));
        for i in 0..k {
            out.push(',');
            out.push_str(&opt(r.decisions.get(i).copied()));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            opt(r.min_bound_margin),
            r.iterations,
            fmt_f64(r.residual),
            r.clip_events
        ));
    }
    out
}

/// Median of the finite entries, `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{CostProfile, StorageCost};
    use crate::valuefn::Grid1D;

    struct Revenue {
        beta: f64,
    }

    impl StageModel for Revenue {
        fn beta(&self) -> f64 {
            self.beta
        }
        fn feasible(&self, x: f64, _ell: f64, _xi: f64) -> Result<(f64, f64)> {
            Ok((0.0, x))
        }
        fn cost_profile(&self, x: f64, _ell: f64, p: f64) -> CostProfile {
            CostProfile::quadratic(0.5, p, -p * x)
        }
        fn sell_down_price(&self, _ell: f64, xi: f64) -> Option<f64> {
            Some(xi)
        }
        fn storage(&self) -> Option<StorageCost> {
            Some(StorageCost::default())
        }
    }

    fn grid(n: usize) -> StateGrid {
        StateGrid::One(Grid1D::uniform(0.0, 2.0, n).unwrap())
    }

    #[test]
    fn single_stage_unit_price() {
        let m = Revenue { beta: 0.5 };
        let r = solve_finite(&m, &[EmpiricalMeasure::dirac(1.0)], &grid(21), false).unwrap();
        assert_eq!(r.values.len(), 2);
        assert!(r.values[1].values().iter().all(|&v| v == 0.0));
        assert!((r.value().eval(1.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_price_is_one_iteration() {
        let m = Revenue { beta: 0.9 };
        let r = solve_infinite(&m, &EmpiricalMeasure::dirac(0.0), &grid(11), &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.value().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let m = Revenue { beta: 0.9 };
        let cfg = SolveConfig {
            vi_tolerance: 1e-14,
            vi_max_iters: 3,
            keep_policy: true,
        };
        let prices = EmpiricalMeasure::uniform(vec![0.1, 4.0]).unwrap();
        let r = solve_infinite(&m, &prices, &grid(41), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.policies.len(), 1);
        assert_eq!(r.residual_history.len(), 3);
    }

    #[test]
    fn levy_reference_is_refused() {
        let m = Revenue { beta: 0.9 };
        let e = reference_solution(&m, &DistributionSpec::levy_standard(), 64, &grid(11), &SolveConfig::default());
        assert!(matches!(e, Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn stage_errors_carry_the_stage() {
        let m = Revenue { beta: 1.5 };
        let ms = vec![EmpiricalMeasure::dirac(1.0); 3];
        match solve_finite(&m, &ms, &grid(5), false) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, f64::NAN, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
