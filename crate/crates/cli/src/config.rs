//! Experiment configuration: a TOML file with one table per section.
//!
//! Every key is optional except `kind`. Missing keys are filled from
//! kind-dependent defaults by [`Config::resolve`]; unknown keys are rejected.

use std::fmt;
use std::path::Path;

use epidp_core::aw::AwConfig;
use epidp_core::bellman::StorageCost;
use epidp_core::measures::{quadrature_measure, DistributionSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Finite,
    Infinite,
    Consistency,
    LevyFig1,
    Ar1,
    AwDistance,
    TailDiagnostics,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Finite => "finite",
            Kind::Infinite => "infinite",
            Kind::Consistency => "consistency",
            Kind::LevyFig1 => "levy-fig1",
            Kind::Ar1 => "ar1",
            Kind::AwDistance => "aw-distance",
            Kind::TailDiagnostics => "tail-diagnostics",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Revenue,
    Ar1,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Option<Family>,
    pub beta: Option<f64>,
    pub storage_quad: Option<f64>,
    pub storage_lin: Option<f64>,
    /// Price distribution of the revenue model, e.g. `exponential(rate=1.0)`.
    pub price: Option<String>,
    pub x1: Option<f64>,
    pub alpha: Option<f64>,
    /// Log-price noise of the AR(1) model, e.g. `normal(0,0.1)`.
    pub noise: Option<String>,
    pub ell1: Option<f64>,
    pub residuals_include_intercept: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_max: Option<f64>,
    pub n_x: Option<usize>,
    pub n_ell: Option<usize>,
    pub ell_min: Option<f64>,
    pub ell_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub nu: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub vi_tolerance: Option<f64>,
    pub vi_max_iters: Option<usize>,
    /// Scale `vi_tolerance` by the size of the bound envelope.
    pub vi_relative: Option<bool>,
    /// Solve under a quadrature discretization of the price law instead of samples.
    pub reference: Option<bool>,
    pub reference_nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwSection {
    pub enabled: Option<bool>,
    pub z_ctr: Option<Vec<f64>>,
    pub rho_max: Option<f64>,
    pub rho_steps: Option<usize>,
    pub ball_samples: Option<usize>,
    /// Value-function CSV files compared by the `aw-distance` kind.
    pub f: Option<String>,
    pub g: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// `[x, ell, xi]` states at which decisions are recorded.
    pub decisions: Option<Vec<[f64; 3]>>,
    pub tail_x: Option<f64>,
    pub tail_ell: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_count: Option<usize>,
    /// Threshold at which the tail trend statistic is read.
    pub trend_alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// Write decision tables for `finite` and `infinite` runs.
    pub policy: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Kind,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub aw: AwSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A configuration that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, msg) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{msg}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn fill<T: Clone>(slot: &mut Option<T>, default: T, name: &str, applied: &mut Vec<String>) {
    if slot.is_none() {
        *slot = Some(default);
        applied.push(name.to_string());
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(vec![e.to_string().trim_end().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        Config::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Fills every missing key with its default; returns the names filled.
    pub fn resolve(&mut self) -> Vec<String> {
        let k = self.kind;
        let mut applied = Vec::new();
        let a = &mut applied;

        let family = match k {
            Kind::Ar1 => Family::Ar1,
            _ => Family::Revenue,
        };
        let m = &mut self.model;
        fill(&mut m.family, family, "model.family", a);
        let is_ar1 = m.family == Some(Family::Ar1);
        fill(&mut m.beta, if k == Kind::LevyFig1 { 0.99 } else { 0.9 }, "model.beta", a);
        fill(&mut m.storage_quad, 0.5, "model.storage_quad", a);
        fill(&mut m.storage_lin, 0.0, "model.storage_lin", a);
        let price = if k == Kind::LevyFig1 { "levy(0.0,1.0)" } else { "exponential(rate=1.0)" };
        fill(&mut m.price, price.to_string(), "model.price", a);
        fill(&mut m.x1, 1.0, "model.x1", a);
        fill(&mut m.alpha, 0.8, "model.alpha", a);
        fill(&mut m.noise, "normal(0.0,0.1)".to_string(), "model.noise", a);
        fill(&mut m.ell1, 0.0, "model.ell1", a);
        fill(&mut m.residuals_include_intercept, false, "model.residuals_include_intercept", a);

        let g = &mut self.grid;
        fill(&mut g.x_max, 2.0, "grid.x_max", a);
        let n_x = match k {
            Kind::LevyFig1 => 401,
            _ if is_ar1 => 101,
            _ => 201,
        };
        fill(&mut g.n_x, n_x, "grid.n_x", a);
        fill(&mut g.n_ell, 61, "grid.n_ell", a);

        let s = &mut self.schedule;
        let nu = match k {
            Kind::LevyFig1 => vec![10, 100, 1000, 10_000],
            Kind::Consistency | Kind::Ar1 | Kind::TailDiagnostics => vec![100, 1000, 10_000],
            _ => vec![1000],
        };
        fill(&mut s.nu, nu, "schedule.nu", a);
        let seeds = match k {
            Kind::LevyFig1 | Kind::Consistency | Kind::Ar1 | Kind::TailDiagnostics => vec![1, 2, 3, 4, 5],
            _ => vec![1],
        };
        fill(&mut s.seeds, seeds, "schedule.seeds", a);
        fill(&mut s.horizon, 10, "schedule.horizon", a);

        let levy = k == Kind::LevyFig1;
        let levy_price = matches!(
            self.model.price.as_deref().map(str::parse::<DistributionSpec>),
            Some(Ok(DistributionSpec::Levy { .. }))
        );
        let sv = &mut self.solver;
        fill(&mut sv.vi_tolerance, if levy { 1e-10 } else { 1e-8 }, "solver.vi_tolerance", a);
        fill(&mut sv.vi_max_iters, if levy { 100_000 } else { 10_000 }, "solver.vi_max_iters", a);
        fill(&mut sv.vi_relative, levy_price, "solver.vi_relative", a);
        fill(&mut sv.reference, false, "solver.reference", a);
        fill(&mut sv.reference_nodes, 64, "solver.reference_nodes", a);

        let base = if is_ar1 { AwConfig::default_2d() } else { AwConfig::default_1d() };
        let w = &mut self.aw;
        fill(
            &mut w.enabled,
            matches!(k, Kind::Consistency | Kind::Ar1 | Kind::AwDistance),
            "aw.enabled",
            a,
        );
        fill(&mut w.z_ctr, base.z_ctr.clone(), "aw.z_ctr", a);
        fill(&mut w.rho_max, base.rho_max, "aw.rho_max", a);
        fill(&mut w.rho_steps, base.rho_steps, "aw.rho_steps", a);
        fill(&mut w.ball_samples, base.ball_samples, "aw.ball_samples", a);

        let p = &mut self.probes;
        fill(&mut p.decisions, vec![[1.0, 0.0, 1.0]], "probes.decisions", a);
        fill(&mut p.tail_x, 1.0, "probes.tail_x", a);
        fill(&mut p.tail_ell, 0.0, "probes.tail_ell", a);
        fill(&mut p.alpha_min, -50.0, "probes.alpha_min", a);
        fill(&mut p.alpha_max, 0.0, "probes.alpha_max", a);
        fill(&mut p.alpha_count, 101, "probes.alpha_count", a);
        fill(&mut p.trend_alpha, -2.0, "probes.trend_alpha", a);

        fill(&mut self.output.dir, "out".to_string(), "output.dir", a);
        fill(&mut self.output.policy, !is_ar1, "output.policy", a);
        applied
    }

    /// Replaces the seed list with a single seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.schedule.seeds = Some(vec![seed]);
    }

    /// All rejections of a resolved configuration.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let m = &self.model;
        let k = self.kind;
        let beta = m.beta.unwrap_or(f64::NAN);
        if !(beta > 0.0 && beta < 1.0) {
            errs.push(format!("model.beta: beta must lie strictly inside (0,1), got {beta}"));
        }
        if let Err(e) = self.storage().validate() {
            errs.push(format!("model.storage: {e}"));
        }
        let price = match self.price() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(format!("model.price: {e}"));
                None
            }
        };
        let is_ar1 = self.family() == Family::Ar1;
        let noise = if is_ar1 {
            match self.noise() {
                Ok(n) => Some(n),
                Err(e) => {
                    errs.push(format!("model.noise: {e}"));
                    None
                }
            }
        } else {
            None
        };
        if is_ar1 {
            let alpha = m.alpha.unwrap_or(f64::NAN);
            if !(alpha > 0.0 && alpha < 1.0) {
                errs.push(format!("model.alpha: alpha must lie strictly inside (0,1), got {alpha}"));
            }
            if let Some(n) = &noise {
                if !n.has_finite_exp_moment() || n.std_dev().is_none() {
                    errs.push(format!("model.noise: {n} needs finite variance and exponential moments"));
                }
            }
        }
        if let Some(x1) = m.x1 {
            if !(x1 >= 0.0 && x1.is_finite()) {
                errs.push(format!("model.x1: initial inventory must be finite and ≥ 0, got {x1}"));
            } else if self.grid.x_max.is_some_and(|xm| x1 > xm) {
                errs.push(format!("model.x1: initial inventory {x1} exceeds grid.x_max"));
            }
        }
        match k {
            Kind::Ar1 if !is_ar1 => errs.push("model.family: the ar1 kind needs family = \"ar1\"".into()),
            Kind::Consistency | Kind::LevyFig1 | Kind::TailDiagnostics if is_ar1 => {
                errs.push(format!("model.family: the {k} kind needs family = \"revenue\""))
            }
            _ => {}
        }
        if k == Kind::LevyFig1 {
            if let Some(p) = &price {
                if *p != DistributionSpec::levy_standard() {
                    errs.push(format!("model.price: the levy-fig1 kind needs levy(0,1), got {p}"));
                }
            }
            if self.solver.vi_relative == Some(false) {
                errs.push("solver.vi_relative: the levy-fig1 kind always uses a relative tolerance".into());
            }
        }
        // Anything that asks for a quadrature reference of a Lévy law is refused.
        let wants_reference = self.solver.reference == Some(true)
            || (k == Kind::Consistency && self.aw.enabled == Some(true));
        if wants_reference && !is_ar1 {
            if let Some(p) = &price {
                if let Err(e) = quadrature_measure(p, 2) {
                    errs.push(format!("solver.reference: {e}"));
                }
            }
        }
        if self.solver.reference == Some(true) && k == Kind::LevyFig1 {
            errs.push("solver.reference: non-integrable reference refused: the levy experiment has no reference".into());
        }

        let g = &self.grid;
        let x_max = g.x_max.unwrap_or(f64::NAN);
        if !(x_max > 0.0 && x_max.is_finite()) {
            errs.push(format!("grid.x_max: must be positive, got {x_max}"));
        }
        if g.n_x.unwrap_or(0) < 2 {
            errs.push("grid.n_x: at least 2 knots are required".into());
        }
        if g.n_ell.unwrap_or(0) < 2 {
            errs.push("grid.n_ell: at least 2 knots are required".into());
        }
        match (g.ell_min, g.ell_max) {
            (Some(lo), Some(hi)) if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                errs.push(format!("grid.ell_min/ell_max: invalid range [{lo}, {hi}]"))
            }
            (Some(_), None) | (None, Some(_)) => errs.push("grid.ell_min/ell_max: give both or neither".into()),
            _ => {}
        }

        let s = &self.schedule;
        match &s.nu {
            Some(nu) if nu.is_empty() => errs.push("schedule.nu: the schedule is empty".into()),
            Some(nu) if nu[0] == 0 => errs.push("schedule.nu: sample sizes must be positive".into()),
            Some(nu) if nu.windows(2).any(|w| w[0] >= w[1]) => {
                errs.push("schedule.nu: the schedule must be strictly increasing".into())
            }
            Some(nu) if k == Kind::Ar1 && nu[0] < 2 => errs.push("schedule.nu: the ar1 kind needs ν ≥ 2".into()),
            _ => {}
        }
        if s.seeds.as_ref().is_some_and(Vec::is_empty) {
            errs.push("schedule.seeds: at least one seed is required".into());
        }
        if s.horizon == Some(0) {
            errs.push("schedule.horizon: the horizon must be at least 1".into());
        }

        let sv = &self.solver;
        let tol = sv.vi_tolerance.unwrap_or(f64::NAN);
        if !(tol > 0.0 && tol.is_finite()) {
            errs.push(format!("solver.vi_tolerance: must be positive, got {tol}"));
        }
        if sv.vi_max_iters == Some(0) {
            errs.push("solver.vi_max_iters: must be at least 1".into());
        }
        if sv.reference_nodes.unwrap_or(0) == 0 {
            errs.push("solver.reference_nodes: must be at least 1".into());
        }

        let dim = if is_ar1 { 3 } else { 2 };
        if self.aw.enabled == Some(true) && k != Kind::AwDistance {
            if let Err(e) = self.aw_config().validate(dim) {
                errs.push(format!("aw: {e}"));
            }
        }
        if k == Kind::AwDistance {
            for (name, v) in [("aw.f", &self.aw.f), ("aw.g", &self.aw.g)] {
                if v.is_none() {
                    errs.push(format!("{name}: the aw-distance kind needs two value-function files"));
                }
            }
        }

        let p = &self.probes;
        if let Some(ds) = &p.decisions {
            for d in ds {
                if !(d[0] >= 0.0 && d[0] <= x_max) {
                    errs.push(format!("probes.decisions: inventory {} is outside [0, {x_max}]", d[0]));
                }
            }
        }
        if k == Kind::LevyFig1 && p.decisions.as_ref().is_some_and(Vec::is_empty) {
            errs.push("probes.decisions: the levy-fig1 kind needs one probe".into());
        }
        if let (Some(lo), Some(hi)) = (p.alpha_min, p.alpha_max) {
            if !(lo < hi) {
                errs.push(format!("probes.alpha_min/alpha_max: invalid range [{lo}, {hi}]"));
            }
        }
        if p.alpha_count.is_some_and(|c| c < 2) {
            errs.push("probes.alpha_count: at least 2 thresholds are required".into());
        } else if k == Kind::TailDiagnostics && self.trend_index().is_none() {
            errs.push("probes.trend_alpha: must be one of the alpha grid points".into());
        }
        errs
    }

    pub fn family(&self) -> Family {
        self.model.family.unwrap_or(Family::Revenue)
    }

    pub fn storage(&self) -> StorageCost {
        StorageCost {
            quad: self.model.storage_quad.unwrap_or(0.5),
            lin: self.model.storage_lin.unwrap_or(0.0),
        }
    }

    pub fn price(&self) -> epidp_core::Result<DistributionSpec> {
        let p: DistributionSpec = self.model.price.as_deref().unwrap_or("exponential(rate=1.0)").parse()?;
        p.validate()?;
        Ok(p)
    }

    pub fn noise(&self) -> epidp_core::Result<DistributionSpec> {
        let n: DistributionSpec = self.model.noise.as_deref().unwrap_or("normal(0.0,0.1)").parse()?;
        n.validate()?;
        Ok(n)
    }

    pub fn aw_config(&self) -> AwConfig {
        let base = if self.family() == Family::Ar1 { AwConfig::default_2d() } else { AwConfig::default_1d() };
        AwConfig {
            z_ctr: self.aw.z_ctr.clone().unwrap_or(base.z_ctr),
            rho_max: self.aw.rho_max.unwrap_or(base.rho_max),
            rho_steps: self.aw.rho_steps.unwrap_or(base.rho_steps),
            ball_samples: self.aw.ball_samples.unwrap_or(base.ball_samples),
        }
    }

    /// The threshold grid of the tail diagnostics.
    pub fn alpha_grid(&self) -> Vec<f64> {
        let p = &self.probes;
        let (lo, hi, n) = (p.alpha_min.unwrap_or(-50.0), p.alpha_max.unwrap_or(0.0), p.alpha_count.unwrap_or(101));
        let step = (hi - lo) / (n - 1) as f64;
        let mut g: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        g[n - 1] = hi;
        g
    }

    /// Position of `trend_alpha` in the threshold grid.
    pub fn trend_index(&self) -> Option<usize> {
        let t = self.probes.trend_alpha.unwrap_or(-2.0);
        let grid = self.alpha_grid();
        let tol = 1e-9 * grid.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        grid.iter().position(|a| (a - t).abs() <= tol)
    }

    /// Resolves, applies the seed override and validates.
    ///
    /// Returns the names of defaulted keys.
    pub fn prepare(&mut self, seed_override: Option<u64>) -> Result<Vec<String>, ConfigError> {
        let mut applied = self.resolve();
        if let Some(s) = seed_override {
            self.override_seed(s);
            applied.push(format!("schedule.seeds (EPIDP_SEED={s})"));
        }
        let errs = self.validate();
        if errs.is_empty() {
            Ok(applied)
        } else {
            Err(ConfigError(errs))
        }
    }
}

/// Reads `EPIDP_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var("EPIDP_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError(vec![format!("EPIDP_SEED: `{v}` is not an unsigned integer")])),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Config::parse("kind = \"infinite\"\n[model]\nbetta = 0.5\n").unwrap_err();
        assert!(e.to_string().contains("betta"), "{e}");
    }

    #[test]
    fn beta_one_is_rejected() {
        let mut c = Config::parse("kind = \"infinite\"\n[model]\nbeta = 1.0\n").unwrap();
        let e = c.prepare(None).unwrap_err();
        assert!(e.to_string().contains("beta must lie strictly inside (0,1)"), "{e}");
    }

    #[test]
    fn levy_reference_is_rejected() {
        let mut c = Config::parse("kind = \"infinite\"\n[model]\nprice = \"levy(0,1)\"\n[solver]\nreference = true\n").unwrap();
        let e = c.prepare(None).unwrap_err();
        assert!(e.to_string().contains("non-integrable reference refused"), "{e}");
    }

    #[test]
    fn empty_schedule_is_rejected() {
        let mut c = Config::parse("kind = \"consistency\"\n[schedule]\nnu = []\n").unwrap();
        let e = c.prepare(None).unwrap_err();
        assert!(e.to_string().contains("schedule is empty"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = Config::parse("kind = \"levy-fig1\"\n").unwrap();
        let applied = c.prepare(None).unwrap();
        assert!(applied.contains(&"model.beta".to_string()));
        assert_eq!(c.model.beta, Some(0.99));
        let again = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn seed_override_replaces_the_list() {
        let mut c = Config::parse("kind = \"consistency\"\n").unwrap();
        c.prepare(Some(42)).unwrap();
        assert_eq!(c.schedule.seeds, Some(vec![42]));
    }
}
