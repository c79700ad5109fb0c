//! The inner minimization `b(V)(x, ξ) = inf_y {φ(x, y, ξ) + βV(y)}`, the
//! Bellman operator `B(V) = E[b(V)(·, ξ)]`, decision rules and truncated
//! tail diagnostics.
//!
//! Two evaluation paths produce the same numbers. The general path scans every
//! grid segment of the feasible interval and minimises the quadratic on each
//! piece in closed form. Models of sell-down type (`φ = C(y) − p(x − y)` on
//! `[0, x]`) get a faster path when every inventory column of `V` is convex:
//! then `y ↦ C(y) + p·y + βV(y)` is convex, its smallest minimiser `y*` is found
//! by bisection on segment slopes, and the optimal decision at `x` is
//! `min(x, y*)`, which lets a whole column be summed with prefix sums.

mod fast;
mod inner;
mod policy;
mod tail;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::{CompensatedSum, EmpiricalMeasure};
use crate::valuefn::{convexity_defect, ValueFn, ValueFn1D};
use crate::{Error, Result};

pub use inner::inner_min_column;
pub use policy::{DecisionRow, DecisionTable};
pub use tail::{decay_trend, inner_value_measure, tail_diagnostics, TailDiagnostic, TrendFit, TREND_THRESHOLD};

/// One quadratic piece `q·y² + l·y + c`, valid from `start` up to the next piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPiece {
    pub start: f64,
    pub q: f64,
    pub l: f64,
    pub c: f64,
}

/// The stage cost as a function of the decision `y`, for fixed `(x, ξ)`.
///
/// Pieces are sorted by `start`; the first piece also covers everything to
/// its left. Every piece must be convex (`q ≥ 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    pub pieces: Vec<QuadPiece>,
}

impl CostProfile {
    pub fn quadratic(q: f64, l: f64, c: f64) -> Self {
        CostProfile {
            pieces: vec![QuadPiece {
                start: f64::NEG_INFINITY,
                q,
                l,
                c,
            }],
        }
    }

    pub fn piece_at(&self, y: f64) -> &QuadPiece {
        let i = self.pieces.partition_point(|p| p.start <= y);
        &self.pieces[i.saturating_sub(1)]
    }

    pub fn eval(&self, y: f64) -> f64 {
        let p = self.piece_at(y);
        (p.q * y + p.l) * y + p.c
    }
}

/// Storage cost `C(y) = quad·y² + lin·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageCost {
    pub quad: f64,
    pub lin: f64,
}

impl Default for StorageCost {
    /// `C(y) = y²/2`.
    fn default() -> Self {
        StorageCost { quad: 0.5, lin: 0.0 }
    }
}

impl StorageCost {
    pub fn eval(&self, y: f64) -> f64 {
        (self.quad * y + self.lin) * y
    }

    pub fn derivative(&self, y: f64) -> f64 {
        2.0 * self.quad * y + self.lin
    }

    /// `C(0) = 0` holds by construction; convex and nondecreasing on ℝ₊ needs both coefficients ≥ 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.quad.is_finite() && self.lin.is_finite()) {
            return Err(Error::Model("storage cost coefficients must be finite".into()));
        }
        if self.quad < 0.0 {
            return Err(Error::Model(format!("storage cost is not convex (quadratic coefficient {})", self.quad)));
        }
        if self.lin < 0.0 {
            return Err(Error::Model(format!("storage cost decreases near 0 (linear coefficient {})", self.lin)));
        }
        Ok(())
    }
}

/// Problem definition for one stage.
///
/// States are `(x, ell)`; one-dimensional models ignore `ell`.
pub trait StageModel: Sync {
    fn beta(&self) -> f64;

    /// Closed feasible interval for the next inventory.
    fn feasible(&self, x: f64, ell: f64, xi: f64) -> Result<(f64, f64)>;

    /// `y ↦ φ((x, ell), y, ξ)` on the feasible interval.
    fn cost_profile(&self, x: f64, ell: f64, xi: f64) -> CostProfile;

    fn stage_cost(&self, x: f64, ell: f64, y: f64, xi: f64) -> f64 {
        self.cost_profile(x, ell, xi).eval(y)
    }

    /// Next exogenous state before clipping, or `None` for one-dimensional models.
    fn exogenous_transition(&self, _ell: f64, _xi: f64) -> Option<f64> {
        None
    }

    /// For models with `φ = C(y) − p(x − y)` on `[0, x]`: the price `p` at `(ell, ξ)`.
    fn sell_down_price(&self, _ell: f64, _xi: f64) -> Option<f64> {
        None
    }

    /// Storage cost of a sell-down model.
    fn storage(&self) -> Option<StorageCost> {
        None
    }
}

/// Result of one operator application.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanOutput {
    pub value: ValueFn,
    /// Number of (log-price knot, atom) pairs whose next log price left the grid.
    pub clip_events: usize,
    pub policy: Option<DecisionTable>,
}

/// Relative tolerance under which a column counts as convex for the fast path.
const CONVEX_TOL: f64 = 1e-10;

fn column_is_convex(col: &ValueFn1D) -> bool {
    let scale = col.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    convexity_defect(col) <= CONVEX_TOL * scale
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("beta must lie strictly inside (0,1), got {beta}")))
    }
}

/// Exact `(value, argmin)` of `y ↦ φ((x, ell), y, ξ) + βV(y[, η])`.
pub fn inner_min<M: StageModel + ?Sized>(model: &M, v: &ValueFn, x: f64, ell: f64, xi: f64) -> Result<(f64, f64)> {
    let (lo, hi) = model.feasible(x, ell, xi)?;
    let profile = model.cost_profile(x, ell, xi);
    match v {
        ValueFn::One(f) => inner_min_column(&profile, model.beta(), f.grid().knots(), f.values(), lo, hi),
        ValueFn::Two(f) => {
            let eta = model
                .exogenous_transition(ell, xi)
                .ok_or_else(|| Error::Model("a 2D value function needs an exogenous transition".into()))?;
            let col = inner::interpolated_column(f, eta);
            inner_min_column(&profile, model.beta(), f.x_grid().knots(), &col, lo, hi)
        }
    }
}

/// `B(V)` on the grid of `V`.
pub fn apply_bellman<M: StageModel + ?Sized>(model: &M, v: &ValueFn, measure: &EmpiricalMeasure) -> Result<ValueFn> {
    Ok(apply_bellman_full(model, v, measure, false)?.value)
}

/// Argmin decisions for every (grid state, atom) pair.
pub fn extract_policy<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
) -> Result<DecisionTable> {
    Ok(apply_bellman_full(model, v, measure, true)?
        .policy
        .expect("policy requested"))
}

/// `B(V)` plus clip counts and, if asked, the decision table.
pub fn apply_bellman_full<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
    want_policy: bool,
) -> Result<BellmanOutput> {
    check_beta(model.beta())?;
    if let Some(c) = model.storage() {
        c.validate()?;
    }
    if let Some(out) = fast::try_apply(model, v, measure, want_policy)? {
        return Ok(out);
    }
    apply_bellman_general(model, v, measure, want_policy)
}

/// `B(V)` by the segment scan at every (state, atom) pair, never taking the
/// sell-down shortcut. Quadratic in the grid size; meant for small grids and
/// for cross-checking.
pub fn apply_bellman_general<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
    want_policy: bool,
) -> Result<BellmanOutput> {
    let atoms = measure.atoms();
    let weights = measure.weights();
    let (xs, ells): (Vec<f64>, Vec<f64>) = match v {
        ValueFn::One(f) => (f.grid().knots().to_vec(), vec![0.0]),
        ValueFn::Two(f) => (f.x_grid().knots().to_vec(), f.ell_grid().knots().to_vec()),
    };
    let states: Vec<(usize, f64, f64)> = xs
        .iter()
        .flat_map(|&x| ells.iter().map(move |&l| (x, l)))
        .enumerate()
        .map(|(k, (x, l))| (k, x, l))
        .collect();
    let per_state: Vec<Result<(f64, Vec<f64>)>> = states
        .par_iter()
        .map(|&(k, x, l)| {
            let mut acc = CompensatedSum::new();
            let mut ys = Vec::with_capacity(if want_policy { atoms.len() } else { 0 });
            for (i, (&xi, &w)) in atoms.iter().zip(weights).enumerate() {
                let (val, y) = inner_min(model, v, x, l, xi)?;
                if !val.is_finite() {
                    return Err(Error::Bellman {
                        knot: k,
                        atom: i,
                        value: val,
                    });
                }
                acc.add(w * val);
                if want_policy {
                    ys.push(y);
                }
            }
            Ok((acc.value(), ys))
        })
        .collect();
    let mut values = Vec::with_capacity(states.len());
    let mut decisions = Vec::new();
    for r in per_state {
        let (val, ys) = r?;
        values.push(val);
        decisions.extend(ys);
    }
    let clip_events = match v {
        ValueFn::Two(f) => {
            let (lo, hi) = (f.ell_grid().lo(), f.ell_grid().hi());
            ells.iter()
                .map(|&l| {
                    atoms
                        .iter()
                        .filter(|&&xi| {
                            let eta = model.exogenous_transition(l, xi).unwrap_or(l);
                            eta < lo || eta > hi
                        })
                        .count()
                })
                .sum()
        }
        ValueFn::One(_) => 0,
    };
    let policy = want_policy.then(|| {
        let ell_knots = matches!(v, ValueFn::Two(_)).then(|| ells.clone());
        DecisionTable::new(&xs, ell_knots, atoms.to_vec(), decisions)
    });
    Ok(BellmanOutput {
        value: v.with_values(values)?,
        clip_events,
        policy,
    })
}
