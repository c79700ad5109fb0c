//! Experiment execution: one function per kind, each returning its CSV files
//! and summary rows in memory. Nothing here touches the filesystem except
//! reading the value-function inputs of `aw-distance`.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use epidp_core::aw::{AwConfig, AwEstimate};
use epidp_core::bellman::StageModel;
use epidp_core::econ::{
    ar1_bound_envelope, ar1_csv, ar1_experiment, build_ar1_model, fig1_csv, fig1_median_csv, levy_experiment,
    revenue_bound_envelope, Ar1ExperimentConfig, Ar1ModelSpec, BoundEnvelope, KappaFit, LevyConfig, RevenueFamily,
    RevenueModel,
};
use epidp_core::fmt_f64;
use epidp_core::measures::{derive_seed, quadrature_measure, DistributionSpec, EmpiricalMeasure, SampleStream};
use epidp_core::solvers::{
    consistency_sweep, median, solve_finite, solve_infinite, sweep_csv, value_distance, CellStatus,
    ConsistencyRecord, SolveConfig, SolveReport, SweepConfig, TailRequest, REFERENCE_NODES,
};
use epidp_core::valuefn::{Grid1D, Grid2D, StateGrid, ValueFn, ValueFn1D, ValueFn2D};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Family, Kind};

/// Status and timing of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub id: String,
    pub status: String,
    pub wall_seconds: f64,
}

impl CellEntry {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub cells: Vec<CellEntry>,
    pub summary: Vec<(String, String)>,
}

impl RunOutput {
    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn putf(&mut self, key: impl Into<String>, value: f64) {
        self.summary.push((key.into(), fmt_f64(value)));
    }

    fn cell(&mut self, id: String, status: &CellStatus, wall_seconds: f64) {
        let status = match status {
            CellStatus::Failed(e) => format!("failed: {e}"),
            s => s.to_string(),
        };
        self.cells.push(CellEntry { id, status, wall_seconds });
    }

    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(CellEntry::is_ok)
    }

    /// `key,value` table.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in &self.summary {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

/// Files the run reads, in a fixed order: value functions of `aw-distance`
/// and the atom files of `empirical(...)` laws.
pub fn input_files(cfg: &Config) -> Vec<String> {
    let mut files: Vec<String> = if cfg.kind == Kind::AwDistance {
        [&cfg.aw.f, &cfg.aw.g].into_iter().flatten().cloned().collect()
    } else {
        Vec::new()
    };
    for law in [&cfg.model.price, &cfg.model.noise].into_iter().flatten() {
        if let Ok(DistributionSpec::Empirical { source, .. }) = law.parse::<DistributionSpec>() {
            if Path::new(&source).is_file() {
                files.push(source);
            }
        }
    }
    files
}

/// Runs a resolved, validated configuration.
pub fn execute(cfg: &Config) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    out.put("kind", cfg.kind);
    match cfg.kind {
        Kind::Finite | Kind::Infinite => single_solves(cfg, &mut out)?,
        Kind::Consistency => consistency(cfg, &mut out)?,
        Kind::LevyFig1 => levy_fig1(cfg, &mut out)?,
        Kind::Ar1 => ar1(cfg, &mut out)?,
        Kind::AwDistance => aw_files(cfg, &mut out)?,
        Kind::TailDiagnostics => tails(cfg, &mut out)?,
    }
    let failed = out.cells.iter().filter(|c| !c.is_ok()).count();
    out.put("cells", out.cells.len());
    out.put("cells_not_ok", failed);
    let summary = out.summary_csv();
    out.file("summary.csv", summary);
    Ok(out)
}

fn beta(cfg: &Config) -> f64 {
    cfg.model.beta.expect("resolved")
}

fn x_max(cfg: &Config) -> f64 {
    cfg.grid.x_max.expect("resolved")
}

fn nus(cfg: &Config) -> &[usize] {
    cfg.schedule.nu.as_deref().expect("resolved")
}

fn seeds(cfg: &Config) -> &[u64] {
    cfg.schedule.seeds.as_deref().expect("resolved")
}

fn revenue_model(cfg: &Config) -> Result<RevenueModel> {
    Ok(RevenueModel::new(beta(cfg), cfg.storage())?)
}

fn grid_1d(cfg: &Config) -> Result<StateGrid> {
    Ok(StateGrid::One(Grid1D::uniform(0.0, x_max(cfg), cfg.grid.n_x.expect("resolved"))?))
}

fn ar1_spec(cfg: &Config) -> Result<Ar1ModelSpec> {
    let spec = Ar1ModelSpec {
        storage: cfg.storage(),
        beta: beta(cfg),
        alpha: cfg.model.alpha.expect("resolved"),
        noise: cfg.noise()?,
        ell_range: cfg.grid.ell_min.zip(cfg.grid.ell_max),
    };
    spec.validate()?;
    Ok(spec)
}

fn grid_2d(cfg: &Config, spec: &Ar1ModelSpec) -> Result<StateGrid> {
    let (lo, hi) = spec.ell_range()?;
    Ok(StateGrid::Two(Grid2D {
        x: Grid1D::uniform(0.0, x_max(cfg), cfg.grid.n_x.expect("resolved"))?,
        ell: Grid1D::uniform(lo, hi, cfg.grid.n_ell.expect("resolved"))?,
    }))
}

/// Stopping tolerance; in relative mode scaled by the envelope size
/// `max(C(x_max), m·x_max)/(1−β)` for a price level `m`.
fn solve_config(cfg: &Config, price_level: f64, keep_policy: bool) -> SolveConfig {
    let sv = &cfg.solver;
    let tol = sv.vi_tolerance.expect("resolved");
    let tol = if sv.vi_relative == Some(true) {
        let xm = x_max(cfg);
        let scale = cfg.storage().eval(xm).max(price_level * xm) / (1.0 - beta(cfg));
        tol * scale.max(1.0)
    } else {
        tol
    };
    SolveConfig {
        vi_tolerance: tol,
        vi_max_iters: sv.vi_max_iters.expect("resolved"),
        keep_policy,
    }
}

fn status_of(report: &SolveReport) -> CellStatus {
    if report.converged {
        CellStatus::Ok
    } else {
        CellStatus::NotConverged
    }
}

fn draws(seed: u64, dist: &DistributionSpec, n: usize) -> Result<EmpiricalMeasure> {
    Ok(EmpiricalMeasure::uniform(SampleStream::new(seed, dist.clone()).sample(n)?)?)
}

/// The sampled law of a model family: prices or log-price noise.
fn sampled_law(cfg: &Config) -> Result<DistributionSpec> {
    Ok(match cfg.family() {
        Family::Revenue => cfg.price()?,
        Family::Ar1 => cfg.noise()?,
    })
}

struct CellInput {
    id: String,
    /// One measure per stage; a single entry for infinite horizons.
    measures: Vec<EmpiricalMeasure>,
}

/// `finite` and `infinite`: one solve per (ν, seed), or one reference solve.
fn single_solves(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let law = sampled_law(cfg)?;
    let horizon = if cfg.kind == Kind::Finite { cfg.schedule.horizon.expect("resolved") } else { 1 };
    let mut inputs = Vec::new();
    if cfg.solver.reference == Some(true) {
        let nodes = cfg.solver.reference_nodes.unwrap_or(REFERENCE_NODES);
        let q = quadrature_measure(&law, nodes)?;
        inputs.push(CellInput {
            id: "ref".into(),
            measures: vec![q; horizon],
        });
    } else {
        for &nu in nus(cfg) {
            for &seed in seeds(cfg) {
                // Stage t draws from its own stream so horizons share their first stages.
                let measures = (1..=horizon)
                    .map(|t| draws(if t == 1 { seed } else { derive_seed(seed, t as u64) }, &law, nu))
                    .collect::<Result<Vec<_>>>()?;
                inputs.push(CellInput {
                    id: format!("nu{nu}_seed{seed}"),
                    measures,
                });
            }
        }
    }
    let keep_policy = cfg.output.policy.unwrap_or(true);
    match cfg.family() {
        Family::Revenue => {
            let model = revenue_model(cfg)?;
            let grid = grid_1d(cfg)?;
            for input in &inputs {
                let env = |ms: &[EmpiricalMeasure]| Ok(revenue_bound_envelope(model.beta, model.storage, ms)?);
                let level = input.measures.iter().map(EmpiricalMeasure::mean).fold(0.0, f64::max);
                solve_cell(cfg, &model, &grid, input, level, keep_policy, env, out);
            }
        }
        Family::Ar1 => {
            let spec = ar1_spec(cfg)?;
            let model = build_ar1_model(&spec, None)?;
            let grid = grid_2d(cfg, &spec)?;
            let ells = match &grid {
                StateGrid::Two(g) => g.ell.knots().to_vec(),
                StateGrid::One(_) => unreachable!("ar1 grids are 2D"),
            };
            let level = ells.last().copied().unwrap_or(0.0).exp();
            for input in &inputs {
                let env = |ms: &[EmpiricalMeasure]| {
                    let fits: Vec<KappaFit> = ms
                        .iter()
                        .map(|m| KappaFit {
                            kappa: m.len(),
                            alpha: model.alpha,
                            noise: m.clone(),
                        })
                        .collect();
                    Ok(ar1_bound_envelope(model.beta, model.storage, &fits, &ells)?)
                };
                solve_cell(cfg, &model, &grid, input, level, keep_policy, env, out);
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_cell<M: StageModel>(
    cfg: &Config,
    model: &M,
    grid: &StateGrid,
    input: &CellInput,
    price_level: f64,
    keep_policy: bool,
    envelope: impl Fn(&[EmpiricalMeasure]) -> Result<BoundEnvelope>,
    out: &mut RunOutput,
) {
    let start = std::time::Instant::now();
    let id = &input.id;
    let result = (|| -> Result<(CellStatus, Vec<(String, String)>, Vec<(String, String)>)> {
        let report = if cfg.kind == Kind::Finite {
            solve_finite(model, &input.measures, grid, keep_policy)?
        } else {
            let sc = solve_config(cfg, price_level, keep_policy);
            solve_infinite(model, &input.measures[0], grid, &sc)?
        };
        let v = report.value();
        let mut files = vec![(format!("value_fn_{id}.csv"), v.to_csv())];
        if let Some(p) = report.policies.first() {
            files.push((format!("policy_{id}.csv"), p.to_csv()));
        }
        // Stage-wise measures all bound V¹ through the same envelope.
        let check = envelope(&input.measures)?.check(v)?;
        files.push((format!("bounds_{id}.csv"), check.to_csv()));
        let x1 = cfg.model.x1.expect("resolved");
        let ell1 = cfg.model.ell1.expect("resolved");
        let mut rows = vec![
            (format!("{id}.iterations"), report.iterations.to_string()),
            (format!("{id}.residual"), fmt_f64(report.residual)),
            (format!("{id}.error_bound"), fmt_f64(report.error_bound)),
            (format!("{id}.converged"), report.converged.to_string()),
            (format!("{id}.clip_events"), report.clip_events.to_string()),
            (format!("{id}.min_bound_margin"), fmt_f64(check.min_margin)),
            (format!("{id}.value_sup"), fmt_f64(sup_abs(v))),
        ];
        if let Ok(val) = v.eval(x1, ell1) {
            rows.push((format!("{id}.value_at_x1"), fmt_f64(val)));
        }
        Ok((status_of(&report), files, rows))
    })();
    let status = match result {
        Ok((status, files, rows)) => {
            out.files.extend(files);
            out.summary.extend(rows);
            status
        }
        Err(e) => CellStatus::Failed(format!("{e:#}")),
    };
    out.cell(id.clone(), &status, start.elapsed().as_secs_f64());
}

fn sup_abs(v: &ValueFn) -> f64 {
    v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest prefix mean over every seed and schedule entry.
fn max_prefix_mean(cfg: &Config, law: &DistributionSpec) -> Result<f64> {
    let max_nu = *nus(cfg).last().expect("nonempty");
    let mut level = 0.0f64;
    for &seed in seeds(cfg) {
        let xs = SampleStream::new(seed, law.clone()).sample(max_nu)?;
        for &nu in nus(cfg) {
            let m = EmpiricalMeasure::uniform(xs[..nu].to_vec())?.mean();
            level = level.max(m);
        }
    }
    Ok(level)
}

fn sweep_config(cfg: &Config, aw: Option<AwConfig>, tail: Option<TailRequest>) -> Result<SweepConfig> {
    let law = cfg.price()?;
    let level = if cfg.solver.vi_relative == Some(true) { max_prefix_mean(cfg, &law)? } else { 0.0 };
    Ok(SweepConfig {
        nu_schedule: nus(cfg).to_vec(),
        seeds: seeds(cfg).to_vec(),
        grid: grid_1d(cfg)?,
        solve: solve_config(cfg, level, false),
        aw,
        reference_nodes: cfg.solver.reference_nodes.expect("resolved"),
        decision_probes: cfg
            .probes
            .decisions
            .as_ref()
            .expect("resolved")
            .iter()
            .map(|d| (d[0], d[1], d[2]))
            .collect(),
        tail,
    })
}

fn record_cells(records: &[ConsistencyRecord], out: &mut RunOutput) {
    for r in records {
        out.cell(format!("nu{}_seed{}", r.nu, r.seed), &r.status, r.wall_seconds);
    }
}

fn medians_by_nu<T>(nus: &[usize], records: &[T], nu_of: impl Fn(&T) -> usize, f: impl Fn(&T) -> Option<f64>) -> Vec<f64> {
    nus.iter()
        .map(|&nu| {
            let xs: Vec<f64> = records.iter().filter(|r| nu_of(r) == nu).filter_map(&f).collect();
            median(&xs).unwrap_or(f64::NAN)
        })
        .collect()
}

fn consistency(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let aw = (cfg.aw.enabled == Some(true)).then(|| cfg.aw_config());
    let sweep = sweep_config(cfg, aw, None)?;
    let records = consistency_sweep(&RevenueFamily(revenue_model(cfg)?), &cfg.price()?, &sweep)?;
    out.file("sweep.csv", sweep_csv(&records));
    record_cells(&records, out);
    let nus = nus(cfg);
    let aw_med = medians_by_nu(nus, &records, |r| r.nu, |r| r.aw_to_ref.map(|a| a.value));
    let err_med = medians_by_nu(nus, &records, |r| r.nu, |r| r.aw_to_ref.map(|a| a.total_error()));
    let margin_med = medians_by_nu(nus, &records, |r| r.nu, |r| r.min_bound_margin);
    for (i, &nu) in nus.iter().enumerate() {
        out.putf(format!("median_aw_to_ref.nu{nu}"), aw_med[i]);
        out.putf(format!("median_aw_error_budget.nu{nu}"), err_med[i]);
        out.putf(format!("median_min_bound_margin.nu{nu}"), margin_med[i]);
    }
    Ok(())
}

fn levy_fig1(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let probe = cfg.probes.decisions.as_ref().expect("resolved")[0];
    let lc = LevyConfig {
        nu_schedule: nus(cfg).to_vec(),
        seeds: seeds(cfg).to_vec(),
        probe: (probe[0], probe[2]),
        beta: beta(cfg),
        storage: cfg.storage(),
        x_max: x_max(cfg),
        knots: cfg.grid.n_x.expect("resolved"),
        vi_rel_tolerance: cfg.solver.vi_tolerance.expect("resolved"),
        vi_max_iters: cfg.solver.vi_max_iters.expect("resolved"),
    };
    let outcome = levy_experiment(&lc)?;
    out.file("fig1.csv", fig1_csv(&outcome));
    out.file("fig1_median.csv", fig1_median_csv(&outcome));
    for r in &outcome.records {
        let status = if r.converged { CellStatus::Ok } else { CellStatus::NotConverged };
        out.cell(format!("nu{}_seed{}", r.nu, r.seed), &status, r.wall_seconds);
    }
    for (nu, m) in &outcome.medians {
        out.putf(format!("median_decision.nu{nu}"), *m);
    }
    let nondecreasing = outcome.medians.windows(2).all(|w| w[1].1 >= w[0].1);
    out.put("median_nondecreasing", nondecreasing);
    Ok(())
}

fn ar1(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let sv = &cfg.solver;
    let ec = Ar1ExperimentConfig {
        spec: ar1_spec(cfg)?,
        ell1: cfg.model.ell1.expect("resolved"),
        nu_schedule: nus(cfg).to_vec(),
        seeds: seeds(cfg).to_vec(),
        x_max: x_max(cfg),
        n_x: cfg.grid.n_x.expect("resolved"),
        n_ell: cfg.grid.n_ell.expect("resolved"),
        solve: SolveConfig {
            vi_tolerance: sv.vi_tolerance.expect("resolved"),
            vi_max_iters: sv.vi_max_iters.expect("resolved"),
            keep_policy: false,
        },
        aw: (cfg.aw.enabled == Some(true)).then(|| cfg.aw_config()),
        reference_nodes: sv.reference_nodes.expect("resolved"),
        residuals_include_intercept: cfg.model.residuals_include_intercept.expect("resolved"),
        ..Ar1ExperimentConfig::default()
    };
    let records = ar1_experiment(&ec)?;
    out.file("ar1.csv", ar1_csv(&records));
    for r in &records {
        out.cell(format!("nu{}_seed{}", r.nu, r.seed), &r.status, r.wall_seconds);
    }
    let nus = nus(cfg);
    let ok = |v: f64| v.is_finite().then_some(v);
    let cols: [(&str, Vec<f64>); 5] = [
        ("median_alpha_error", medians_by_nu(nus, &records, |r| r.nu, |r| ok(r.alpha_error.abs()))),
        ("median_bl_distance", medians_by_nu(nus, &records, |r| r.nu, |r| ok(r.bl_distance))),
        ("median_aw_to_ref", medians_by_nu(nus, &records, |r| r.nu, |r| r.aw_to_ref.map(|a| a.value))),
        ("median_min_bound_margin", medians_by_nu(nus, &records, |r| r.nu, |r| ok(r.min_bound_margin))),
        ("median_max_series_ratio", medians_by_nu(nus, &records, |r| r.nu, |r| ok(r.max_series_ratio))),
    ];
    for (name, vals) in cols {
        for (i, &nu) in nus.iter().enumerate() {
            out.putf(format!("{name}.nu{nu}"), vals[i]);
        }
    }
    Ok(())
}

/// Reads a value function written by this tool: `x,value` or `x,ell,value`.
pub fn load_value_fn(path: &Path) -> Result<ValueFn> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = text.lines().next().unwrap_or("").trim();
    let v = if header.starts_with("x,ell,") {
        ValueFn::Two(ValueFn2D::from_csv(&text)?)
    } else {
        ValueFn::One(ValueFn1D::from_csv(&text)?)
    };
    Ok(v)
}

/// `value,err_quadrature,err_ball,err_tail`.
pub fn aw_csv(e: &AwEstimate) -> String {
    format!(
        "value,err_quadrature,err_ball,err_tail\n{},{},{},{}\n",
        fmt_f64(e.value),
        fmt_f64(e.err_quadrature),
        fmt_f64(e.err_ball),
        fmt_f64(e.err_tail)
    )
}

/// AW distance between two value-function files.
pub fn aw_between(f: &Path, g: &Path, aw: &AwConfig) -> Result<AwEstimate> {
    let (f, g) = (load_value_fn(f)?, load_value_fn(g)?);
    Ok(value_distance(&f, &g, aw)?)
}

fn aw_files(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let start = std::time::Instant::now();
    let f = cfg.aw.f.as_deref().ok_or_else(|| anyhow!("aw.f is missing"))?;
    let g = cfg.aw.g.as_deref().ok_or_else(|| anyhow!("aw.g is missing"))?;
    let (fv, gv) = (load_value_fn(Path::new(f))?, load_value_fn(Path::new(g))?);
    let mut aw = cfg.aw_config();
    // A 1D default centre is padded for 2D inputs.
    if matches!(fv, ValueFn::Two(_)) && aw.z_ctr == [0.0, 0.0] {
        aw.z_ctr = vec![0.0; 3];
    }
    let e = value_distance(&fv, &gv, &aw)?;
    out.file("aw.csv", aw_csv(&e));
    out.putf("aw.value", e.value);
    out.putf("aw.total_error", e.total_error());
    out.cell("aw".into(), &CellStatus::Ok, start.elapsed().as_secs_f64());
    Ok(())
}

fn tails(cfg: &Config, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.probes;
    let alpha_grid = cfg.alpha_grid();
    let tail = TailRequest {
        probe: (p.tail_x.expect("resolved"), p.tail_ell.expect("resolved")),
        alpha_grid: alpha_grid.clone(),
    };
    let sweep = sweep_config(cfg, None, Some(tail))?;
    let records = consistency_sweep(&RevenueFamily(revenue_model(cfg)?), &cfg.price()?, &sweep)?;
    record_cells(&records, out);
    for r in &records {
        if let Some(t) = r.tails.first() {
            out.file(format!("tail_nu{}_seed{}.csv", r.nu, r.seed), t.to_csv());
        }
    }
    let ti = cfg.trend_index().ok_or_else(|| anyhow!("trend_alpha is not on the alpha grid"))?;
    let nus = nus(cfg);
    let at_trend = medians_by_nu(nus, &records, |r| r.nu, |r| r.tails.first().map(|t| t.lower[ti]));
    let at_min = medians_by_nu(nus, &records, |r| r.nu, |r| r.tails.first().map(|t| t.lower[0]));
    let mut csv = String::from("nu,median_lower_at_trend_alpha,median_lower_at_alpha_min\n");
    for (i, nu) in nus.iter().enumerate() {
        csv.push_str(&format!("{nu},{},{}\n", fmt_f64(at_trend[i]), fmt_f64(at_min[i])));
    }
    out.file("tail_trend.csv", csv);
    out.putf("trend_alpha", alpha_grid[ti]);
    if nus.len() >= 2 && at_trend.iter().all(|v| v.is_finite()) {
        let xs: Vec<f64> = nus.iter().map(|&n| n as f64).collect();
        let fit = epidp_core::bellman::decay_trend(&xs, &at_trend)?;
        out.putf("trend_slope", fit.slope);
        out.put("trend_fires", fit.fires);
    }
    Ok(())
}
