use serde::{Deserialize, Serialize};

use super::{inner_min, StageModel};
use crate::measures::EmpiricalMeasure;
use crate::valuefn::ValueFn;
use crate::{fmt_f64, Error, Result};

/// Truncated expectations of the inner values at one probe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDiagnostic {
    pub probe_x: f64,
    pub probe_ell: Option<f64>,
    pub alpha_grid: Vec<f64>,
    /// `E[b·𝟙{b ≤ α}]` per α.
    pub lower: Vec<f64>,
    /// `E[b·𝟙{b ≥ α}]` per α.
    pub upper: Vec<f64>,
}

impl TailDiagnostic {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,lower,upper\n");
        for ((a, l), u) in self.alpha_grid.iter().zip(&self.lower).zip(&self.upper) {
            out.push_str(&format!("{},{},{}\n", fmt_f64(*a), fmt_f64(*l), fmt_f64(*u)));
        }
        out
    }
}

/// The measure of inner values `b(V)(probe, ξ)` under `measure`, atom order kept.
pub fn inner_value_measure<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
    x: f64,
    ell: f64,
) -> Result<EmpiricalMeasure> {
    let mut values = Vec::with_capacity(measure.len());
    for (i, &xi) in measure.atoms().iter().enumerate() {
        let (b, _) = inner_min(model, v, x, ell, xi)?;
        if !b.is_finite() {
            return Err(Error::Bellman {
                knot: 0,
                atom: i,
                value: b,
            });
        }
        values.push(b);
    }
    EmpiricalMeasure::new(values, measure.weights().to_vec())
}

/// Lower and upper truncated-expectation curves of the inner values at each probe.
///
/// Probes are `(x, ell)`; `ell` is ignored for one-dimensional value functions.
pub fn tail_diagnostics<M: StageModel + ?Sized>(
    model: &M,
    v: &ValueFn,
    measure: &EmpiricalMeasure,
    probes: &[(f64, f64)],
    alpha_grid: &[f64],
) -> Result<Vec<TailDiagnostic>> {
    probes
        .iter()
        .map(|&(x, ell)| {
            let b = inner_value_measure(model, v, measure, x, ell)?;
            let mut lower = Vec::with_capacity(alpha_grid.len());
            let mut upper = Vec::with_capacity(alpha_grid.len());
            for &a in alpha_grid {
                lower.push(b.truncated_lower_expectation(|t| t, a)?);
                upper.push(b.truncated_upper_expectation(|t| t, a)?);
            }
            Ok(TailDiagnostic {
                probe_x: x,
                probe_ell: matches!(v, ValueFn::Two(_)).then_some(ell),
                alpha_grid: alpha_grid.to_vec(),
                lower,
                upper,
            })
        })
        .collect()
}

/// Log-log growth slope above which a tail statistic counts as growing with ν.
pub const TREND_THRESHOLD: f64 = 0.25;

/// Least-squares slope of `ln|stat|` against `ln ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    /// True when the slope reaches [`TREND_THRESHOLD`]: the truncated mass grows with ν.
    pub fires: bool,
}

/// Fits the growth rate of `|stats|` over the sample sizes `nus`.
///
/// Zero statistics are floored at the smallest positive normal number so a
/// vanishing tail reads as a strongly negative slope.
pub fn decay_trend(nus: &[f64], stats: &[f64]) -> Result<TrendFit> {
    if nus.len() != stats.len() || nus.len() < 2 {
        return Err(Error::Shape("a trend needs at least two (nu, statistic) pairs".into()));
    }
    let xs: Vec<f64> = nus.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("all sample sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(TrendFit {
        slope,
        fires: slope >= TREND_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_on_power_laws() {
        let nus = [1e2, 1e3, 1e4];
        let growing = decay_trend(&nus, &[10.0, 100.0, 1000.0]).unwrap();
        assert!((growing.slope - 1.0).abs() < 1e-12 && growing.fires);
        let flat = decay_trend(&nus, &[0.7, 0.72, 0.69]).unwrap();
        assert!(!flat.fires);
        let vanishing = decay_trend(&nus, &[1.0, 0.0, 0.0]).unwrap();
        assert!(vanishing.slope < 0.0 && !vanishing.fires);
    }
}
