use super::CostProfile;
use crate::valuefn::ValueFn2D;
use crate::{Error, Result};

/// The inventory column of `f` at log price `eta` (clipped), as knot values.
pub(crate) fn interpolated_column(f: &ValueFn2D, eta: f64) -> Vec<f64> {
    let g = f.ell_grid();
    let (j, t) = g.locate(eta.clamp(g.lo(), g.hi()));
    (0..f.x_grid().len())
        .map(|i| {
            let (a, b) = (f.at(i, j), f.at(i, j + 1));
            if t == 0.0 {
                a
            } else if t == 1.0 {
                b
            } else {
                (1.0 - t) * a + t * b
            }
        })
        .collect()
}

fn interp(knots: &[f64], col: &[f64], y: f64) -> f64 {
    let n = knots.len();
    let i = knots.partition_point(|&k| k <= y).clamp(1, n - 1) - 1;
    let (a, b) = (knots[i], knots[i + 1]);
    if y == a {
        return col[i];
    }
    if y == b {
        return col[i + 1];
    }
    let t = (y - a) / (b - a);
    (1.0 - t) * col[i] + t * col[i + 1]
}

/// Segment-exact minimum of `y ↦ φ(y) + β·V(y)` over `[lo, hi]`, where `V` is
/// the piecewise-linear interpolant of `col` on `knots`.
///
/// Between consecutive breakpoints (grid knots, cost-piece starts and the
/// interval ends) the objective is a single convex quadratic, minimised at
/// its clamped vertex. Candidates are visited in increasing `y` and only a
/// strict improvement replaces the incumbent, so ties go to the smallest `y`.
pub fn inner_min_column(
    profile: &CostProfile,
    beta: f64,
    knots: &[f64],
    col: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    if !(lo <= hi) {
        return Err(Error::Model(format!("empty feasible interval [{lo}, {hi}]")));
    }
    let (k0, kn) = (knots[0], knots[knots.len() - 1]);
    if lo < k0 || hi > kn {
        return Err(Error::Model(format!(
            "feasible interval [{lo}, {hi}] leaves the grid span [{k0}, {kn}]"
        )));
    }
    let objective = |y: f64| profile.eval(y) + beta * interp(knots, col, y);

    let mut breaks: Vec<f64> = Vec::with_capacity(knots.len() + profile.pieces.len() + 2);
    breaks.push(lo);
    let first = knots.partition_point(|&k| k <= lo);
    let last = knots.partition_point(|&k| k < hi);
    if first < last {
        breaks.extend_from_slice(&knots[first..last]);
    }
    breaks.extend(profile.pieces.iter().map(|p| p.start).filter(|&s| s > lo && s < hi));
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut best_y = lo;
    let mut best = objective(lo);
    let consider = |y: f64, val: f64, best: &mut f64, best_y: &mut f64| {
        let slack = 4.0 * f64::EPSILON * best.abs().max(val.abs()).max(1.0);
        if val < *best - slack {
            *best = val;
            *best_y = y;
        }
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let piece = profile.piece_at(mid);
        let i = knots.partition_point(|&k| k <= mid).clamp(1, knots.len() - 1) - 1;
        let slope = (col[i + 1] - col[i]) / (knots[i + 1] - knots[i]);
        if piece.q > 0.0 {
            let vertex = (-(piece.l + beta * slope) / (2.0 * piece.q)).clamp(a, b);
            if vertex > a && vertex < b {
                consider(vertex, objective(vertex), &mut best, &mut best_y);
            }
        }
        consider(b, objective(b), &mut best, &mut best_y);
    }
    Ok((best, best_y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn revenue(x: f64, p: f64) -> CostProfile {
        CostProfile::quadratic(0.5, p, -p * x)
    }

    #[test]
    fn zero_price_holds_nothing() {
        let knots = [0.0, 0.5, 1.0];
        let (v, y) = inner_min_column(&revenue(1.0, 0.0), 0.9, &knots, &[0.0; 3], 0.0, 1.0).unwrap();
        assert_eq!((v, y), (0.0, 0.0));
    }

    #[test]
    fn positive_price_sells_everything() {
        let knots = [0.0, 0.5, 1.0];
        let (v, y) = inner_min_column(&revenue(1.0, 2.0), 0.9, &knots, &[0.0; 3], 0.0, 1.0).unwrap();
        assert_eq!((v, y), (-2.0, 0.0));
        let (v, y) = inner_min_column(&revenue(1.0, 0.5), 0.9, &knots, &[0.0; 3], 0.0, 1.0).unwrap();
        assert_eq!((v, y), (-0.5, 0.0));
    }

    #[test]
    fn interior_vertex_between_knots() {
        // ½y² − y·1.5 has its vertex at 1.5, inside the segment [1, 2].
        let knots = [0.0, 1.0, 2.0];
        let profile = CostProfile::quadratic(0.5, -1.5, 0.0);
        let (v, y) = inner_min_column(&profile, 0.5, &knots, &[0.0; 3], 0.0, 2.0).unwrap();
        assert!((y - 1.5).abs() < 1e-15);
        assert!((v + 1.125).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_smallest_y() {
        let knots = [0.0, 1.0, 2.0, 3.0];
        let profile = CostProfile::quadratic(0.0, 0.0, 1.0);
        let (_, y) = inner_min_column(&profile, 0.5, &knots, &[2.0, 1.0, 1.0, 1.0], 0.0, 3.0).unwrap();
        assert_eq!(y, 1.0);
    }

    #[test]
    fn degenerate_interval() {
        let knots = [0.0, 1.0];
        let (v, y) = inner_min_column(&revenue(0.0, 1.0), 0.5, &knots, &[3.0, 0.0], 0.0, 0.0).unwrap();
        assert_eq!((v, y), (1.5, 0.0));
    }

    #[test]
    fn empty_interval_is_model_error() {
        let knots = [0.0, 1.0];
        assert!(matches!(
            inner_min_column(&revenue(1.0, 1.0), 0.5, &knots, &[0.0; 2], 0.6, 0.4),
            Err(Error::Model(_))
        ));
    }
}
