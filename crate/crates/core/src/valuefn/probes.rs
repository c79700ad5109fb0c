use super::{ValueFn1D, ValueFn2D};
use crate::{Error, Result};

/// Functions stored as knot values on a grid.
pub trait GridValues {
    fn knot_values(&self) -> &[f64];
    fn same_grid(&self, other: &Self) -> bool;
}

impl GridValues for ValueFn1D {
    fn knot_values(&self) -> &[f64] {
        self.values()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.grid() == other.grid()
    }
}

impl GridValues for ValueFn2D {
    fn knot_values(&self) -> &[f64] {
        self.values()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.x_grid() == other.x_grid() && self.ell_grid() == other.ell_grid()
    }
}

/// Largest knotwise absolute difference.
pub fn sup_norm_diff<F: GridValues>(f: &F, g: &F) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::Shape("sup-norm difference needs identical grids".into()));
    }
    Ok(f.knot_values()
        .iter()
        .zip(g.knot_values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Largest negated second difference over interior knots, or 0.
///
/// On non-uniform knots the second difference at `k_i` is twice the gap
/// between the chord through the neighbours and the value, which reduces to
/// `f_{i−1} − 2f_i + f_{i+1}` on uniform knots.
fn defect_of(knots: &[f64], value: impl Fn(usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 1..knots.len().saturating_sub(1) {
        let lam = (knots[i + 1] - knots[i]) / (knots[i + 1] - knots[i - 1]);
        let chord = lam * value(i - 1) + (1.0 - lam) * value(i + 1);
        worst = worst.max(2.0 * (value(i) - chord));
    }
    worst
}

pub fn convexity_defect(f: &ValueFn1D) -> f64 {
    defect_of(f.grid().knots(), |i| f.values()[i])
}

/// `(convexity defect in x over all ℓ-slices, concavity defect in ℓ over all x-slices)`.
pub fn saddle_defect(f: &ValueFn2D) -> (f64, f64) {
    let (nx, nl) = (f.x_grid().len(), f.ell_grid().len());
    let convex = (0..nl)
        .map(|j| defect_of(f.x_grid().knots(), |i| f.at(i, j)))
        .fold(0.0, f64::max);
    let concave = (0..nx)
        .map(|i| defect_of(f.ell_grid().knots(), |j| -f.at(i, j)))
        .fold(0.0, f64::max);
    (convex, concave)
}

/// Largest segment slope among segments meeting `[center − radius, center + radius]`.
pub fn local_lipschitz(f: &ValueFn1D, center: f64, radius: f64) -> f64 {
    let k = f.grid().knots();
    let v = f.values();
    (0..k.len() - 1)
        .filter(|&i| k[i + 1] >= center - radius && k[i] <= center + radius)
        .map(|i| ((v[i + 1] - v[i]) / (k[i + 1] - k[i])).abs())
        .fold(0.0, f64::max)
}

/// Largest edge slope among cells meeting the box of half-width `radius` around `(x, ell)`.
pub fn local_lipschitz_2d(f: &ValueFn2D, x: f64, ell: f64, radius: f64) -> f64 {
    let kx = f.x_grid().knots();
    let kl = f.ell_grid().knots();
    let mut worst = 0.0f64;
    for i in 0..kx.len() - 1 {
        if kx[i + 1] < x - radius || kx[i] > x + radius {
            continue;
        }
        for j in 0..kl.len() - 1 {
            if kl[j + 1] < ell - radius || kl[j] > ell + radius {
                continue;
            }
            let hx = kx[i + 1] - kx[i];
            let hl = kl[j + 1] - kl[j];
            let edges = [
                (f.at(i + 1, j) - f.at(i, j)) / hx,
                (f.at(i + 1, j + 1) - f.at(i, j + 1)) / hx,
                (f.at(i, j + 1) - f.at(i, j)) / hl,
                (f.at(i + 1, j + 1) - f.at(i + 1, j)) / hl,
            ];
            worst = edges.iter().fold(worst, |w, s| w.max(s.abs()));
        }
    }
    worst
}
