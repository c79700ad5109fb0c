use serde::{Deserialize, Serialize};

use super::{ValueFn1D, ValueFn2D};

/// A point `(state, alpha)` of state × cost space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpigraphPoint {
    pub state: Vec<f64>,
    pub alpha: f64,
}

impl EpigraphPoint {
    pub fn new_1d(x: f64, alpha: f64) -> Self {
        EpigraphPoint { state: vec![x], alpha }
    }

    pub fn new_2d(x: f64, ell: f64, alpha: f64) -> Self {
        EpigraphPoint {
            state: vec![x, ell],
            alpha,
        }
    }
}

fn point_segment_dist2(px: f64, pa: f64, x0: f64, a0: f64, x1: f64, a1: f64) -> f64 {
    let (dx, da) = (x1 - x0, a1 - a0);
    let len2 = dx * dx + da * da;
    let t = if len2 > 0.0 {
        (((px - x0) * dx + (pa - a0) * da) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qa) = (x0 + t * dx - px, a0 + t * da - pa);
    qx * qx + qa * qa
}

/// Distance from `(x, alpha)` to the upward ray `{(end, a) : a ≥ base}`.
fn ray_dist2(px: f64, pa: f64, end: f64, base: f64) -> f64 {
    let dx = px - end;
    let da = (base - pa).max(0.0);
    dx * dx + da * da
}

/// Distance from `z` to the epigraph of `f` restricted to `[x_0, domain_cap]`.
///
/// The boundary of the restricted epigraph is the graph plus two vertical
/// rays at the ends of the domain; the distance is the exact minimum over
/// those pieces. `domain_cap` is clamped into the grid span.
pub fn epigraph_distance(z: &EpigraphPoint, f: &ValueFn1D, domain_cap: f64) -> f64 {
    dist_1d(f, domain_cap, z.state[0], z.alpha)
}

pub(crate) fn dist_1d(f: &ValueFn1D, cap: f64, px: f64, pa: f64) -> f64 {
    let grid = f.grid();
    let knots = grid.knots();
    let vals = f.values();
    let lo = grid.lo();
    let cap = cap.clamp(lo, grid.hi());
    if px >= lo && px <= cap && pa >= f.eval_unchecked(px) {
        return 0.0;
    }
    let cap_val = f.eval_unchecked(cap);
    let mut best = ray_dist2(px, pa, lo, vals[0]).min(ray_dist2(px, pa, cap, cap_val));
    let mut i = 0;
    while i + 1 < knots.len() && knots[i] < cap {
        let (x1, a1) = if knots[i + 1] <= cap {
            (knots[i + 1], vals[i + 1])
        } else {
            (cap, cap_val)
        };
        best = best.min(point_segment_dist2(px, pa, knots[i], vals[i], x1, a1));
        i += 1;
    }
    best.sqrt()
}

/// Minimiser over `[0, 1]` of the convex `w(s − c)² + max(0, a + b·s)²`.
fn line_min(w: f64, c: f64, a: f64, b: f64) -> f64 {
    let s = if a + b * c <= 0.0 {
        c
    } else {
        (w * c - a * b) / (w + b * b)
    };
    s.clamp(0.0, 1.0)
}

struct Cell {
    xa: f64,
    hx: f64,
    la: f64,
    hl: f64,
    f00: f64,
    f10: f64,
    f01: f64,
    f11: f64,
}

impl Cell {
    fn value(&self, s: f64, t: f64) -> f64 {
        (1.0 - s) * ((1.0 - t) * self.f00 + t * self.f01) + s * ((1.0 - t) * self.f10 + t * self.f11)
    }

    fn objective(&self, s: f64, t: f64, z: [f64; 3]) -> f64 {
        let dx = self.xa + s * self.hx - z[0];
        let dl = self.la + t * self.hl - z[1];
        let da = (self.value(s, t) - z[2]).max(0.0);
        dx * dx + dl * dl + da * da
    }

    /// Coordinate descent with exact line minimisation from a 3×3 set of starts.
    fn local_min(&self, z: [f64; 3]) -> f64 {
        let (wx, wl) = (self.hx * self.hx, self.hl * self.hl);
        let (cx, cl) = ((z[0] - self.xa) / self.hx, (z[1] - self.la) / self.hl);
        let mut best = f64::INFINITY;
        for s0 in [0.0, 0.5, 1.0] {
            for t0 in [0.0, 0.5, 1.0] {
                let (mut s, mut t) = (s0, t0);
                for _ in 0..40 {
                    let p = (1.0 - t) * self.f00 + t * self.f01;
                    let q = (1.0 - t) * self.f10 + t * self.f11 - p;
                    let s_new = line_min(wx, cx, p - z[2], q);
                    let p = (1.0 - s_new) * self.f00 + s_new * self.f10;
                    let q = (1.0 - s_new) * self.f01 + s_new * self.f11 - p;
                    let t_new = line_min(wl, cl, p - z[2], q);
                    let moved = (s_new - s).abs() + (t_new - t).abs();
                    s = s_new;
                    t = t_new;
                    if moved < 1e-13 {
                        break;
                    }
                }
                best = best.min(self.objective(s, t, z));
            }
        }
        best
    }
}

fn gap2(v: f64, lo: f64, hi: f64) -> f64 {
    let d = if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    };
    d * d
}

const BLOCK: usize = 8;

/// Distance from `z = (x, ell, alpha)` to the epigraph of the bilinear `f`
/// over `[x_0, domain_cap] × [ell_min, ell_max]`.
///
/// Each cell is searched by local descent from a 3×3 multistart, so the
/// result is an upper bound on the exact distance (exact whenever the
/// descent reaches the cell's global minimiser). Cells are visited in order
/// of a corner-based lower bound and skipped once that bound exceeds the
/// incumbent.
pub fn epigraph_distance_2d(z: &EpigraphPoint, f: &ValueFn2D, domain_cap: f64) -> f64 {
    dist_2d(f, domain_cap, [z.state[0], z.state[1], z.alpha])
}

pub(crate) fn dist_2d(f: &ValueFn2D, cap: f64, z: [f64; 3]) -> f64 {
    let kx = f.x_grid().knots();
    let kl = f.ell_grid().knots();
    let cap = cap.clamp(kx[0], kx[kx.len() - 1]);
    let (lmin, lmax) = (kl[0], kl[kl.len() - 1]);
    if z[0] >= kx[0] && z[0] <= cap && z[1] >= lmin && z[1] <= lmax && z[2] >= f.eval_unchecked(z[0], z[1]) {
        return 0.0;
    }
    // Cells in x that meet [x_0, cap]; the last one is cut at cap.
    let ncx = kx.partition_point(|&k| k < cap).max(1);
    let ncl = kl.len() - 1;
    let xb = |i: usize| (kx[i], kx[i + 1].min(cap));
    let cell_min = |i: usize, j: usize| f.at(i, j).min(f.at(i + 1, j)).min(f.at(i, j + 1)).min(f.at(i + 1, j + 1));

    let mut best = {
        let px = z[0].clamp(kx[0], cap);
        let pl = z[1].clamp(lmin, lmax);
        let da = (f.eval_unchecked(px, pl) - z[2]).max(0.0);
        (px - z[0]).powi(2) + (pl - z[1]).powi(2) + da * da
    };

    let mut blocks = Vec::new();
    for bi in (0..ncx).step_by(BLOCK) {
        for bj in (0..ncl).step_by(BLOCK) {
            let ie = (bi + BLOCK).min(ncx);
            let je = (bj + BLOCK).min(ncl);
            let mut m = f64::INFINITY;
            for i in bi..ie {
                for j in bj..je {
                    m = m.min(cell_min(i, j));
                }
            }
            let da = (m - z[2]).max(0.0);
            let lb = gap2(z[0], kx[bi], xb(ie - 1).1) + gap2(z[1], kl[bj], kl[je]) + da * da;
            blocks.push((lb, bi, ie, bj, je));
        }
    }
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0));

    for &(lb, bi, ie, bj, je) in &blocks {
        if lb >= best {
            break;
        }
        for i in bi..ie {
            let (xa, xe) = xb(i);
            let gx = gap2(z[0], xa, xe);
            if gx >= best {
                continue;
            }
            let span = kx[i + 1] - kx[i];
            let cut = (xe - xa) / span;
            for j in bj..je {
                let da = (cell_min(i, j) - z[2]).max(0.0);
                if gx + gap2(z[1], kl[j], kl[j + 1]) + da * da >= best {
                    continue;
                }
                let cell = Cell {
                    xa,
                    hx: xe - xa,
                    la: kl[j],
                    hl: kl[j + 1] - kl[j],
                    f00: f.at(i, j),
                    f01: f.at(i, j + 1),
                    f10: f.at(i, j) + cut * (f.at(i + 1, j) - f.at(i, j)),
                    f11: f.at(i, j + 1) + cut * (f.at(i + 1, j + 1) - f.at(i, j + 1)),
                };
                best = best.min(cell.local_min(z));
            }
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::super::{Grid1D, Grid2D};
    use super::*;

    #[test]
    fn on_graph_is_zero() {
        let f = ValueFn1D::from_fn(Grid1D::uniform(0.0, 2.0, 11).unwrap(), |x| x * x).unwrap();
        assert_eq!(epigraph_distance(&EpigraphPoint::new_1d(1.0, 1.0), &f, 2.0), 0.0);
    }

    #[test]
    fn vertical_drop_below_flat_function() {
        let f = ValueFn1D::zeros(Grid1D::uniform(0.0, 10.0, 11).unwrap());
        assert!((epigraph_distance(&EpigraphPoint::new_1d(5.0, -3.0), &f, 10.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_onto_diagonal() {
        let f = ValueFn1D::from_fn(Grid1D::uniform(0.0, 10.0, 11).unwrap(), |x| x).unwrap();
        let d = epigraph_distance(&EpigraphPoint::new_1d(1.0, 0.0), &f, 10.0);
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn outside_domain_uses_rays() {
        let f = ValueFn1D::zeros(Grid1D::uniform(0.0, 1.0, 3).unwrap());
        let d = epigraph_distance(&EpigraphPoint::new_1d(-2.0, 5.0), &f, 1.0);
        assert!((d - 2.0).abs() < 1e-15);
        // The cap shortens the domain.
        let d = epigraph_distance(&EpigraphPoint::new_1d(0.9, 1.0), &f, 0.5);
        assert!((d - 0.4).abs() < 1e-15);
    }

    #[test]
    fn planar_case_matches_1d() {
        let g = Grid2D {
            x: Grid1D::uniform(0.0, 10.0, 11).unwrap(),
            ell: Grid1D::uniform(-1.0, 1.0, 5).unwrap(),
        };
        let f = ValueFn2D::from_fn(&g, |x, _| x).unwrap();
        let d = epigraph_distance_2d(&EpigraphPoint::new_2d(1.0, 0.3, 0.0), &f, 10.0);
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{d}");
        let d = epigraph_distance_2d(&EpigraphPoint::new_2d(1.0, 3.0, 5.0), &f, 10.0);
        assert!((d - 2.0).abs() < 1e-12);
    }
}
