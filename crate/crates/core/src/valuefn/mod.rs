//! Grid-sampled value functions.
//!
//! One-dimensional functions interpolate linearly between knots, which keeps
//! convex knot data convex. Two-dimensional functions (inventory × log-price)
//! interpolate bilinearly; the log-price coordinate is clipped to the grid on
//! evaluation while the inventory coordinate must lie inside its span.

mod epigraph;
mod probes;

use serde::{Deserialize, Serialize};

use crate::{fmt_f64, Error, Result};

pub(crate) use epigraph::{dist_1d, dist_2d};
pub use epigraph::{epigraph_distance, epigraph_distance_2d, EpigraphPoint};
pub use probes::{
    convexity_defect, local_lipschitz, local_lipschitz_2d, saddle_defect, sup_norm_diff, GridValues,
};

/// Strictly increasing knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    knots: Vec<f64>,
}

impl Grid1D {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 knots, got {}", knots.len())));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Domain("grid knots must be finite".into()));
        }
        if let Some(i) = knots.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "grid knots must be strictly increasing (knot {} = {} ≥ knot {} = {})",
                i,
                knots[i],
                i + 1,
                knots[i + 1]
            )));
        }
        Ok(Grid1D { knots })
    }

    /// `n` equally spaced knots from `lo` to `hi`, both included exactly.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 knots, got {n}")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut knots: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        knots[n - 1] = hi;
        Grid1D::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    /// Segment index `i` and weight `t` with `x = (1 − t)·k_i + t·k_{i+1}`.
    /// The caller guarantees `x` lies in the span.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.knots.len();
        let i = self.knots.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        if x == a {
            (i, 0.0)
        } else {
            (i, ((x - a) / (b - a)).clamp(0.0, 1.0))
        }
    }

    /// Index of the first knot `≥ x` (the number of knots below `x`).
    pub fn first_at_or_above(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k < x)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        (1.0 - t) * a + t * b
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Domain(format!("value at knot {i} is not finite: {}", values[i]))),
        None => Ok(()),
    }
}

/// Piecewise-linear function on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFn1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ValueFn1D {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} knots but {} values",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ValueFn1D { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        let n = grid.len();
        ValueFn1D {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.knots().iter().map(|&x| f(x)).collect();
        ValueFn1D::new(grid, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; exact at knots, an error outside the span.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside the grid span [{}, {}]",
                self.grid.lo(),
                self.grid.hi()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Linear interpolation for `x` already known to lie in the span.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        let (i, t) = self.grid.locate(x);
        lerp(self.values[i], self.values[i + 1], t)
    }

    /// Adds `c` at every knot.
    pub fn shifted(&self, c: f64) -> Self {
        ValueFn1D {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.grid.knots().iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*v)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, "x,value", 2)?;
        let (xs, vs) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
        ValueFn1D::new(Grid1D::new(xs)?, vs)
    }
}

/// Bilinear function on a product grid, values stored row-major as
/// `values[i * n_ell + j]` for knot `(x_i, ell_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFn2D {
    x: Grid1D,
    ell: Grid1D,
    values: Vec<f64>,
}

/// Product of an inventory grid and a log-price grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x: Grid1D,
    pub ell: Grid1D,
}

impl Grid2D {
    pub fn len(&self) -> usize {
        self.x.len() * self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ValueFn2D {
    pub fn new(x: Grid1D, ell: Grid1D, values: Vec<f64>) -> Result<Self> {
        if x.len() * ell.len() != values.len() {
            return Err(Error::Shape(format!(
                "{}×{} grid but {} values",
                x.len(),
                ell.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ValueFn2D { x, ell, values })
    }

    pub fn zeros(grid: &Grid2D) -> Self {
        ValueFn2D {
            x: grid.x.clone(),
            ell: grid.ell.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x.knots() {
            for &l in grid.ell.knots() {
                values.push(f(x, l));
            }
        }
        ValueFn2D::new(grid.x.clone(), grid.ell.clone(), values)
    }

    pub fn x_grid(&self) -> &Grid1D {
        &self.x
    }

    pub fn ell_grid(&self) -> &Grid1D {
        &self.ell
    }

    pub fn grid(&self) -> Grid2D {
        Grid2D {
            x: self.x.clone(),
            ell: self.ell.clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ell.len() + j]
    }

    /// Bilinear interpolation with `ell` clipped to the log-price span.
    pub fn eval(&self, x: f64, ell: f64) -> Result<f64> {
        if !self.x.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside the grid span [{}, {}]",
                self.x.lo(),
                self.x.hi()
            )));
        }
        Ok(self.eval_unchecked(x, ell))
    }

    pub fn eval_unchecked(&self, x: f64, ell: f64) -> f64 {
        let ell = ell.clamp(self.ell.lo(), self.ell.hi());
        let (i, s) = self.x.locate(x);
        let (j, t) = self.ell.locate(ell);
        let lo = lerp(self.at(i, j), self.at(i, j + 1), t);
        let hi = lerp(self.at(i + 1, j), self.at(i + 1, j + 1), t);
        lerp(lo, hi, s)
    }

    /// The inventory slice at log-price knot `j`.
    pub fn slice_at_ell(&self, j: usize) -> ValueFn1D {
        let values = (0..self.x.len()).map(|i| self.at(i, j)).collect();
        ValueFn1D {
            grid: self.x.clone(),
            values,
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        ValueFn2D {
            x: self.x.clone(),
            ell: self.ell.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,ell,value\n");
        for (i, x) in self.x.knots().iter().enumerate() {
            for (j, l) in self.ell.knots().iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", fmt_f64(*x), fmt_f64(*l), fmt_f64(self.at(i, j))));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, "x,ell,value", 3)?;
        let mut xs: Vec<f64> = Vec::new();
        let mut ls: Vec<f64> = Vec::new();
        for r in &rows {
            if xs.last() != Some(&r[0]) {
                xs.push(r[0]);
            }
            if xs.len() == 1 {
                ls.push(r[1]);
            }
        }
        if xs.len() * ls.len() != rows.len() {
            return Err(Error::Parse("rows do not form a row-major product grid".into()));
        }
        for (k, r) in rows.iter().enumerate() {
            if r[0] != xs[k / ls.len()] || r[1] != ls[k % ls.len()] {
                return Err(Error::Parse(format!("row {} breaks the row-major knot order", k + 2)));
            }
        }
        let values = rows.iter().map(|r| r[2]).collect();
        ValueFn2D::new(Grid1D::new(xs)?, Grid1D::new(ls)?, values)
    }
}

/// A value function of either dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValueFn {
    One(ValueFn1D),
    Two(ValueFn2D),
}

/// The grid a [`ValueFn`] lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateGrid {
    One(Grid1D),
    Two(Grid2D),
}

impl StateGrid {
    pub fn zeros(&self) -> ValueFn {
        match self {
            StateGrid::One(g) => ValueFn::One(ValueFn1D::zeros(g.clone())),
            StateGrid::Two(g) => ValueFn::Two(ValueFn2D::zeros(g)),
        }
    }

    /// Inventory knots.
    pub fn x(&self) -> &Grid1D {
        match self {
            StateGrid::One(g) => g,
            StateGrid::Two(g) => &g.x,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StateGrid::One(g) => g.len(),
            StateGrid::Two(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ValueFn {
    pub fn values(&self) -> &[f64] {
        match self {
            ValueFn::One(f) => f.values(),
            ValueFn::Two(f) => f.values(),
        }
    }

    pub fn grid(&self) -> StateGrid {
        match self {
            ValueFn::One(f) => StateGrid::One(f.grid().clone()),
            ValueFn::Two(f) => StateGrid::Two(f.grid()),
        }
    }

    /// Same grid, new knot values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<ValueFn> {
        Ok(match self {
            ValueFn::One(f) => ValueFn::One(ValueFn1D::new(f.grid().clone(), values)?),
            ValueFn::Two(f) => ValueFn::Two(ValueFn2D::new(f.x_grid().clone(), f.ell_grid().clone(), values)?),
        })
    }

    pub fn shifted(&self, c: f64) -> ValueFn {
        match self {
            ValueFn::One(f) => ValueFn::One(f.shifted(c)),
            ValueFn::Two(f) => ValueFn::Two(f.shifted(c)),
        }
    }

    /// Evaluates at `(x, ell)`; `ell` is ignored in 1D.
    pub fn eval(&self, x: f64, ell: f64) -> Result<f64> {
        match self {
            ValueFn::One(f) => f.eval(x),
            ValueFn::Two(f) => f.eval(x, ell),
        }
    }

    pub fn sup_norm_diff(&self, other: &ValueFn) -> Result<f64> {
        match (self, other) {
            (ValueFn::One(a), ValueFn::One(b)) => sup_norm_diff(a, b),
            (ValueFn::Two(a), ValueFn::Two(b)) => sup_norm_diff(a, b),
            _ => Err(Error::Shape("cannot compare 1D and 2D value functions".into())),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            ValueFn::One(f) => f.to_csv(),
            ValueFn::Two(f) => f.to_csv(),
        }
    }

    pub fn as_1d(&self) -> Option<&ValueFn1D> {
        match self {
            ValueFn::One(f) => Some(f),
            ValueFn::Two(_) => None,
        }
    }

    pub fn as_2d(&self) -> Option<&ValueFn2D> {
        match self {
            ValueFn::Two(f) => Some(f),
            ValueFn::One(_) => None,
        }
    }
}

fn parse_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some(h) if h == header => {}
        other => return Err(Error::Parse(format!("expected header `{header}`, got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::Parse(format!("line {}: expected {width} fields", k + 2)));
            }
            fields
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(vec![0.0]).is_err());
        assert!(Grid1D::new(vec![0.0, 0.0]).is_err());
        assert!(Grid1D::new(vec![0.0, 2.0, 1.0]).is_err());
        let g = Grid1D::uniform(0.0, 2.0, 401).unwrap();
        assert_eq!(g.hi(), 2.0);
        assert_eq!(g.knots()[200], 1.0);
    }

    #[test]
    fn linear_interpolation() {
        let f = ValueFn1D::new(Grid1D::new(vec![0.0, 1.0]).unwrap(), vec![0.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.25).unwrap(), 0.25);
        assert!(matches!(f.eval(1.5), Err(Error::Domain(_))));
        assert!(f.eval(-1e-300).is_err());
    }

    #[test]
    fn zero_function_is_zero() {
        let f = ValueFn1D::zeros(Grid1D::uniform(0.0, 3.0, 7).unwrap());
        assert_eq!(f.eval(1.234).unwrap(), 0.0);
    }

    #[test]
    fn square_interpolation_error() {
        let f = ValueFn1D::from_fn(Grid1D::uniform(0.0, 2.0, 101).unwrap(), |x| x * x).unwrap();
        assert!((f.eval(1.3).unwrap() - 1.69).abs() <= 4e-4);
    }

    #[test]
    fn exact_at_knots() {
        let g = Grid1D::new(vec![0.0, 0.1, 0.35, 0.7, 1.0]).unwrap();
        let f = ValueFn1D::new(g.clone(), vec![0.3, -1.0 / 3.0, 2.0f64.sqrt(), 1e-17, 5.5]).unwrap();
        for (x, v) in g.knots().iter().zip(f.values()) {
            assert_eq!(f.eval(*x).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn bilinear_and_clipping() {
        let grid = Grid2D {
            x: Grid1D::uniform(0.0, 1.0, 3).unwrap(),
            ell: Grid1D::uniform(-1.0, 1.0, 5).unwrap(),
        };
        let f = ValueFn2D::from_fn(&grid, |x, l| 2.0 * x + l + x * l).unwrap();
        assert!((f.eval(0.3, 0.2).unwrap() - (0.6 + 0.2 + 0.06)).abs() < 1e-15);
        assert_eq!(f.eval(1.0, 7.0).unwrap(), f.eval(1.0, 1.0).unwrap());
        assert!(f.eval(1.1, 0.0).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let f = ValueFn1D::from_fn(Grid1D::uniform(0.0, 1.0, 9).unwrap(), |x| (3.0 * x).sin()).unwrap();
        assert_eq!(ValueFn1D::from_csv(&f.to_csv()).unwrap(), f);
        let grid = Grid2D {
            x: Grid1D::uniform(0.0, 1.0, 4).unwrap(),
            ell: Grid1D::uniform(-0.5, 0.5, 3).unwrap(),
        };
        let g = ValueFn2D::from_fn(&grid, |x, l| x.exp() - l / 3.0).unwrap();
        assert!(g.to_csv().starts_with("x,ell,value\n"));
        assert_eq!(ValueFn2D::from_csv(&g.to_csv()).unwrap(), g);
    }
}
