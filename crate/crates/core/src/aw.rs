//! Numerical Attouch-Wets distance between grid value functions.
//!
//! The distance is
//!
//! ```text
//! dl(f, g) = ∫_0^∞ max_{z ∈ B_ρ(z_ctr)} |dist(z, epi f) − dist(z, epi g)| e^{−ρ} dρ
//! ```
//!
//! evaluated by the trapezoidal rule on `[0, rho_max]`, with the inner max
//! taken over a fixed point set in the ball. Both functions see the same
//! points, so `dl(f, g)` and `dl(g, f)` are computed from identical terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::CompensatedSum;
use crate::valuefn::{dist_1d, dist_2d, ValueFn1D, ValueFn2D};
use crate::{Error, Result};

/// Quadrature and sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwConfig {
    /// Centre point `(x, alpha)` in 1D or `(x, ell, alpha)` in 2D.
    pub z_ctr: Vec<f64>,
    pub rho_max: f64,
    /// Number of trapezoid intervals on `[0, rho_max]`.
    pub rho_steps: usize,
    /// Points per ball, centre included.
    pub ball_samples: usize,
}

impl AwConfig {
    pub fn default_1d() -> Self {
        AwConfig {
            z_ctr: vec![0.0, 0.0],
            rho_max: 20.0,
            rho_steps: 1024,
            ball_samples: 256,
        }
    }

    pub fn default_2d() -> Self {
        AwConfig {
            z_ctr: vec![0.0, 0.0, 0.0],
            rho_max: 20.0,
            rho_steps: 128,
            ball_samples: 128,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.z_ctr.len() != dim {
            return Err(Error::Parameter(format!(
                "z_ctr needs {dim} coordinates, got {}",
                self.z_ctr.len()
            )));
        }
        if self.z_ctr.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("z_ctr must be finite".into()));
        }
        if !(self.rho_max.is_finite() && self.rho_max > 0.0) {
            return Err(Error::Parameter(format!("rho_max must be positive, got {}", self.rho_max)));
        }
        if self.rho_steps < 8 {
            return Err(Error::Parameter(format!("rho_steps must be at least 8, got {}", self.rho_steps)));
        }
        if self.ball_samples < 16 {
            return Err(Error::Parameter(format!(
                "ball_samples must be at least 16, got {}",
                self.ball_samples
            )));
        }
        Ok(())
    }
}

/// A distance value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwEstimate {
    pub value: f64,
    /// Richardson estimate `|I_n − I_{n/2}| / 3` of the trapezoid error.
    pub err_quadrature: f64,
    /// Worst-case shortfall of the sampled max: the integrand is 2-Lipschitz
    /// in `z`, so it is `2·ρ·(covering radius of the unit point set)` per node.
    pub err_ball: f64,
    /// `(rho_max + 1 + C)·e^{−rho_max}` with `C` the larger distance from `z_ctr`
    /// to the two epigraphs; the integrand never exceeds `C + ρ`.
    pub err_tail: f64,
}

impl AwEstimate {
    pub fn total_error(&self) -> f64 {
        self.err_quadrature + self.err_ball + self.err_tail
    }
}

fn radical_inverse(mut i: u64, base: u64, multiplier: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        let digit = ((i % base) * multiplier) % base;
        r += digit as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

const BASES: [u64; 3] = [2, 3, 5];
const MULTIPLIERS: [u64; 3] = [1, 2, 3];

/// Unit-ball point set in dimension 2 or 3: the centre, a quarter of the
/// budget evenly spaced on the sphere boundary (the disc boundary in 2D
/// includes the four axis directions), and generalized Halton points filling
/// the interior with equal volume density.
pub fn unit_ball_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]];
    let boundary = if dim == 2 { (count / 4) / 4 * 4 } else { count / 4 };
    for k in 0..boundary {
        if dim == 2 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / boundary as f64;
            pts.push(vec![th.cos(), th.sin()]);
        } else {
            // Fibonacci sphere.
            let zc = 1.0 - (2.0 * k as f64 + 1.0) / boundary as f64;
            let r = (1.0 - zc * zc).max(0.0).sqrt();
            let th = k as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
            pts.push(vec![r * th.cos(), r * th.sin(), zc]);
        }
    }
    let mut i = 1u64;
    while pts.len() < count {
        let u: Vec<f64> = (0..dim).map(|d| radical_inverse(i, BASES[d], MULTIPLIERS[d])).collect();
        i += 1;
        let p = if dim == 2 {
            let r = u[0].sqrt();
            let th = 2.0 * std::f64::consts::PI * u[1];
            vec![r * th.cos(), r * th.sin()]
        } else {
            let r = u[0].cbrt();
            let c = 1.0 - 2.0 * u[1];
            let s = (1.0 - c * c).max(0.0).sqrt();
            let ph = 2.0 * std::f64::consts::PI * u[2];
            vec![r * s * ph.cos(), r * s * ph.sin(), r * c]
        };
        pts.push(p);
    }
    pts
}

/// Largest distance from a probe of the unit ball to the nearest point of `pts`,
/// estimated on a dense probe set.
pub fn covering_radius(dim: usize, pts: &[Vec<f64>]) -> f64 {
    let probes = unit_ball_points(dim, if dim == 2 { 8192 } else { 16384 });
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    probes
        .iter()
        .map(|q| pts.iter().map(|p| dist2(q, p)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        .sqrt()
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    let mut acc = CompensatedSum::new();
    for (k, v) in values.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc.add(w * v);
    }
    h * acc.value()
}

/// Generic driver over balls in `dim` coordinates: `dist_pair(z)` returns `(dist(z, epi f), dist(z, epi g))`.
fn integrate<D>(cfg: &AwConfig, dim: usize, dist_pair: D) -> AwEstimate
where
    D: Fn(&[f64]) -> (f64, f64) + Sync,
{
    let unit = unit_ball_points(dim, cfg.ball_samples);
    let ctr = &cfg.z_ctr;
    let integrand = |rho: f64| -> f64 {
        let mut z = vec![0.0; dim];
        let mut best = 0.0f64;
        for p in &unit {
            for d in 0..dim {
                z[d] = ctr[d] + rho * p[d];
            }
            let (a, b) = dist_pair(&z);
            best = best.max((a - b).abs());
        }
        best * (-rho).exp()
    };
    let n = cfg.rho_steps;
    let h = cfg.rho_max / n as f64;
    let fine: Vec<f64> = (0..=n).into_par_iter().map(|k| integrand(k as f64 * h)).collect();
    let value = trapezoid(&fine, h);
    let coarse = if n.is_multiple_of(2) {
        let pts: Vec<f64> = fine.iter().step_by(2).copied().collect();
        trapezoid(&pts, 2.0 * h)
    } else {
        let m = n / 2;
        let hc = cfg.rho_max / m as f64;
        let pts: Vec<f64> = (0..=m).into_par_iter().map(|k| integrand(k as f64 * hc)).collect();
        trapezoid(&pts, hc)
    };
    let cov = covering_radius(dim, &unit);
    let weights_rho: Vec<f64> = (0..=n)
        .map(|k| {
            let rho = k as f64 * h;
            2.0 * cov * rho * (-rho).exp()
        })
        .collect();
    let (c0f, c0g) = dist_pair(ctr);
    let c = c0f.max(c0g);
    AwEstimate {
        value,
        err_quadrature: (value - coarse).abs() / 3.0,
        err_ball: trapezoid(&weights_rho, h),
        err_tail: (cfg.rho_max + 1.0 + c) * (-cfg.rho_max).exp(),
    }
}

/// Attouch-Wets distance between two one-dimensional grid functions.
///
/// The functions must share their inventory span and `z_ctr` must sit above
/// a point of that span; epigraphs are taken over the full span.
pub fn aw_distance(f: &ValueFn1D, g: &ValueFn1D, cfg: &AwConfig) -> Result<AwEstimate> {
    cfg.validate(2)?;
    let (fg, gg) = (f.grid(), g.grid());
    if fg.lo() != gg.lo() || fg.hi() != gg.hi() {
        return Err(Error::Domain(format!(
            "domains differ: [{}, {}] vs [{}, {}]",
            fg.lo(),
            fg.hi(),
            gg.lo(),
            gg.hi()
        )));
    }
    if !fg.contains(cfg.z_ctr[0]) {
        return Err(Error::Domain(format!(
            "z_ctr state {} lies outside the domain [{}, {}]",
            cfg.z_ctr[0],
            fg.lo(),
            fg.hi()
        )));
    }
    let cap = fg.hi();
    Ok(integrate(cfg, 2, |z| (dist_1d(f, cap, z[0], z[1]), dist_1d(g, cap, z[0], z[1]))))
}

/// Attouch-Wets distance between two inventory × log-price grid functions.
pub fn aw_distance_2d(f: &ValueFn2D, g: &ValueFn2D, cfg: &AwConfig) -> Result<AwEstimate> {
    cfg.validate(3)?;
    for (a, b, name) in [(f.x_grid(), g.x_grid(), "inventory"), (f.ell_grid(), g.ell_grid(), "log-price")] {
        if a.lo() != b.lo() || a.hi() != b.hi() {
            return Err(Error::Domain(format!(
                "{name} domains differ: [{}, {}] vs [{}, {}]",
                a.lo(),
                a.hi(),
                b.lo(),
                b.hi()
            )));
        }
    }
    if !f.x_grid().contains(cfg.z_ctr[0]) || !f.ell_grid().contains(cfg.z_ctr[1]) {
        return Err(Error::Domain(format!(
            "z_ctr state ({}, {}) lies outside the grid rectangle",
            cfg.z_ctr[0], cfg.z_ctr[1]
        )));
    }
    let cap = f.x_grid().hi();
    Ok(integrate(cfg, 3, |z| {
        let z = [z[0], z[1], z[2]];
        (dist_2d(f, cap, z), dist_2d(g, cap, z))
    }))
}
