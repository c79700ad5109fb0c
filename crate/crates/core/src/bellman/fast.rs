use rayon::prelude::*;

use super::{column_is_convex, BellmanOutput, DecisionTable, StageModel, StorageCost};
use crate::measures::{CompensatedSum, EmpiricalMeasure};
use crate::valuefn::{ValueFn, ValueFn2D};
use crate::{Error, Result};

/// Smallest minimiser data of `g(y) = C(y) + p·y + β·V(y)` on the whole grid.
struct AtomSolution {
    y_star: f64,
    /// `g(y*)`.
    m: f64,
    /// First knot index with `x_k ≥ y*`.
    bucket: usize,
}

fn solve_atom(knots: &[f64], col: impl Fn(usize) -> f64, beta: f64, c: StorageCost, p: f64) -> AtomSolution {
    let n = knots.len();
    let slope = |k: usize| (col(k + 1) - col(k)) / (knots[k + 1] - knots[k]);
    // Derivative of g at the right end of segment k; nondecreasing in k when g is convex.
    let right = |k: usize| c.derivative(knots[k + 1]) + p + beta * slope(k);
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if right(mid) < 0.0 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let (y_star, v_star, bucket) = if lo == n - 1 {
        (knots[n - 1], col(n - 1), n - 1)
    } else {
        let k = lo;
        let s = slope(k);
        let left = c.derivative(knots[k]) + p + beta * s;
        if left >= 0.0 {
            (knots[k], col(k), k)
        } else {
            let y = if c.quad > 0.0 {
                (-(c.lin + p + beta * s) / (2.0 * c.quad)).clamp(knots[k], knots[k + 1])
            } else {
                knots[k + 1]
            };
            if y >= knots[k + 1] {
                (knots[k + 1], col(k + 1), k + 1)
            } else {
                let t = (y - knots[k]) / (knots[k + 1] - knots[k]);
                (y, (1.0 - t) * col(k) + t * col(k + 1), k + 1)
            }
        }
    };
    AtomSolution {
        y_star,
        m: c.eval(y_star) + p * y_star + beta * v_star,
        bucket,
    }
}

/// Per-bucket compensated totals of `w·m` and `w·p`, turned into prefix sums over buckets.
fn prefix_sums(n: usize, sols: &[AtomSolution], prices: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut bm = vec![CompensatedSum::new(); n];
    let mut bp = vec![CompensatedSum::new(); n];
    for ((s, &p), &w) in sols.iter().zip(prices).zip(weights) {
        bm[s.bucket].add(w * s.m);
        bp[s.bucket].add(w * p);
    }
    let mut m_acc = CompensatedSum::new();
    let mut p_acc = CompensatedSum::new();
    let mut m_pre = Vec::with_capacity(n);
    let mut p_pre = Vec::with_capacity(n);
    for k in 0..n {
        m_acc.add(bm[k].value());
        p_acc.add(bp[k].value());
        m_pre.push(m_acc.value());
        p_pre.push(p_acc.value());
    }
    (m_pre, p_pre)
}

fn check_solutions(sols: &[AtomSolution], prices: &[f64]) -> Result<()> {
    for (i, (s, &p)) in sols.iter().zip(prices).enumerate() {
        if !p.is_finite() {
            return Err(Error::Bellman {
                knot: 0,
                atom: i,
                value: p,
            });
        }
        if !s.m.is_finite() {
            return Err(Error::Bellman {
                knot: s.bucket,
                atom: i,
                value: s.m,
            });
        }
    }
    Ok(())
}

fn decisions_for(knots: &[f64], sols: &[AtomSolution], out: &mut Vec<f64>) {
    for (k, &x) in knots.iter().enumerate() {
        out.extend(sols.iter().map(|s| if s.bucket <= k { s.y_star } else { x }));
    }
}

/// Runs the sell-down path when it applies; `Ok(None)` means "use the general path".
pub(super) fn try_apply<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
    want_policy: bool,
) -> Result<Option<BellmanOutput>> {
    let Some(c) = model.storage() else {
        return Ok(None);
    };
    let beta = model.beta();
    let atoms = measure.atoms();
    let weights = measure.weights();
    match v {
        ValueFn::One(f) => {
            let knots = f.grid().knots();
            if knots[0] != 0.0 || !column_is_convex(f) {
                return Ok(None);
            }
            let Some(prices) = atoms
                .iter()
                .map(|&xi| model.sell_down_price(0.0, xi))
                .collect::<Option<Vec<f64>>>()
            else {
                return Ok(None);
            };
            let col = f.values();
            let sols: Vec<AtomSolution> = prices
                .par_iter()
                .map(|&p| solve_atom(knots, |k| col[k], beta, c, p))
                .collect();
            check_solutions(&sols, &prices)?;
            let n = knots.len();
            let (m_pre, p_pre) = prefix_sums(n, &sols, &prices, weights);
            let mut hold = vec![CompensatedSum::new(); n];
            for (s, &w) in sols.iter().zip(weights) {
                hold[s.bucket].add(w);
            }
            // Weight of atoms with bucket > k, accumulated from the top.
            let mut above = vec![0.0; n];
            let mut acc = CompensatedSum::new();
            for k in (0..n).rev() {
                above[k] = acc.value();
                acc.add(hold[k].value());
            }
            let values: Vec<f64> = (0..n)
                .map(|k| {
                    let x = knots[k];
                    m_pre[k] - p_pre[k] * x + above[k] * (c.eval(x) + beta * col[k])
                })
                .collect();
            let policy = want_policy.then(|| {
                let mut ys = Vec::with_capacity(n * atoms.len());
                decisions_for(knots, &sols, &mut ys);
                DecisionTable::new(knots, None, atoms.to_vec(), ys)
            });
            Ok(Some(BellmanOutput {
                value: v.with_values(values)?,
                clip_events: 0,
                policy,
            }))
        }
        ValueFn::Two(f) => two_dim(model, f, measure, c, want_policy),
    }
}

struct ColumnResult {
    values: Vec<f64>,
    clips: usize,
    decisions: Vec<f64>,
}

fn two_dim<M: StageModel + ?Sized>(
    model: &M,
    f: &ValueFn2D,
    measure: &EmpiricalMeasure,
    c: StorageCost,
    want_policy: bool,
) -> Result<Option<BellmanOutput>> {
    let knots = f.x_grid().knots();
    let ells = f.ell_grid().knots();
    let (nx, nl) = (knots.len(), ells.len());
    if knots[0] != 0.0 || !(0..nl).all(|j| column_is_convex(&f.slice_at_ell(j))) {
        return Ok(None);
    }
    let atoms = measure.atoms();
    let weights = measure.weights();
    let beta = model.beta();
    let (lmin, lmax) = (ells[0], ells[nl - 1]);
    for &xi in atoms {
        if model.sell_down_price(ells[0], xi).is_none() || model.exogenous_transition(ells[0], xi).is_none() {
            return Ok(None);
        }
    }
    let at = |i: usize, j: usize| f.at(i, j);

    let columns: Vec<Result<ColumnResult>> = ells
        .par_iter()
        .map(|&ell| {
            let mut prices = Vec::with_capacity(atoms.len());
            let mut interp = Vec::with_capacity(atoms.len());
            let mut clips = 0;
            for &xi in atoms {
                let eta = model.exogenous_transition(ell, xi).expect("checked above");
                if eta < lmin || eta > lmax {
                    clips += 1;
                }
                prices.push(model.sell_down_price(ell, xi).expect("checked above"));
                interp.push(f.ell_grid().locate(eta.clamp(lmin, lmax)));
            }
            let sols: Vec<AtomSolution> = prices
                .iter()
                .zip(&interp)
                .map(|(&p, &(a, t))| {
                    let col = |k: usize| {
                        if t == 0.0 {
                            at(k, a)
                        } else if t == 1.0 {
                            at(k, a + 1)
                        } else {
                            (1.0 - t) * at(k, a) + t * at(k, a + 1)
                        }
                    };
                    solve_atom(knots, col, beta, c, p)
                })
                .collect();
            check_solutions(&sols, &prices)?;
            let (m_pre, p_pre) = prefix_sums(nx, &sols, &prices, weights);
            // Held mass per bucket, spread onto the two neighbouring log-price knots.
            let mut bucket_mass = vec![0.0; nx * nl];
            for ((s, &(a, t)), &w) in sols.iter().zip(&interp).zip(weights) {
                bucket_mass[s.bucket * nl + a] += w * (1.0 - t);
                if t > 0.0 {
                    bucket_mass[s.bucket * nl + a + 1] += w * t;
                }
            }
            let mut omega = vec![0.0; nl];
            let mut values = vec![0.0; nx];
            for k in (0..nx).rev() {
                if k + 1 < nx {
                    for (o, b) in omega.iter_mut().zip(&bucket_mass[(k + 1) * nl..(k + 2) * nl]) {
                        *o += b;
                    }
                }
                let held: f64 = omega.iter().sum();
                let future: f64 = omega.iter().enumerate().map(|(jj, o)| o * at(k, jj)).sum();
                let x = knots[k];
                values[k] = m_pre[k] - p_pre[k] * x + held * c.eval(x) + beta * future;
            }
            let mut decisions = Vec::new();
            if want_policy {
                decisions_for(knots, &sols, &mut decisions);
            }
            Ok(ColumnResult {
                values,
                clips,
                decisions,
            })
        })
        .collect();

    let mut values = vec![0.0; nx * nl];
    let mut clip_events = 0;
    let mut per_col_decisions = Vec::with_capacity(nl);
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        for k in 0..nx {
            values[k * nl + j] = col.values[k];
        }
        clip_events += col.clips;
        per_col_decisions.push(col.decisions);
    }
    let policy = want_policy.then(|| {
        // Row order (x_k, ell_j, atom i), matching the general path.
        let na = atoms.len();
        let mut ys = Vec::with_capacity(nx * nl * na);
        for k in 0..nx {
            for d in &per_col_decisions {
                ys.extend_from_slice(&d[k * na..(k + 1) * na]);
            }
        }
        DecisionTable::new(knots, Some(ells.to_vec()), atoms.to_vec(), ys)
    });
    Ok(Some(BellmanOutput {
        value: ValueFn::Two(ValueFn2D::new(f.x_grid().clone(), f.ell_grid().clone(), values)?),
        clip_events,
        policy,
    }))
}
