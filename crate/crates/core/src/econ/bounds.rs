use serde::{Deserialize, Serialize};

use crate::bellman::StorageCost;
use crate::measures::{CompensatedSum, EmpiricalMeasure};
use crate::valuefn::ValueFn;
use crate::{fmt_f64, Error, Result};

/// Relative size of the certified series remainder at truncation.
const SERIES_REL_TAIL: f64 = 1e-10;
/// Terms skipped before successive-term ratios are compared with β.
const RATIO_BURN_IN: usize = 20;
const MAX_TERMS: usize = 100_000;

/// A fitted AR(1) law on the first κ transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaFit {
    pub kappa: usize,
    pub alpha: f64,
    pub noise: EmpiricalMeasure,
}

/// Truncated series `Σ_t β^{t−1} exp(α^t ℓ) Π_{τ<t} E[exp(α^τ ξ)]` for one κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerms {
    pub kappa: usize,
    pub alpha: f64,
    /// `ln E[exp(α^τ ξ)]` for `τ = 0, …, T−1`.
    pub log_moments: Vec<f64>,
    /// Largest ratio of successive terms past the burn-in, over the log-price knots.
    pub max_ratio: f64,
}

impl SeriesTerms {
    pub fn len(&self) -> usize {
        self.log_moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_moments.is_empty()
    }

    /// The series at log price `ell`.
    pub fn sum(&self, beta: f64, ell: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        let mut log_prod = 0.0;
        let mut a_pow = 1.0;
        let mut b_pow = 1.0;
        for lm in &self.log_moments {
            log_prod += lm;
            a_pow *= self.alpha;
            acc.add(b_pow * (a_pow * ell + log_prod).exp());
            b_pow *= beta;
        }
        acc.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Lower {
    /// `x · min_κ −E_κ[p]/(1−β)`.
    Linear { kappas: Vec<usize>, means: Vec<f64>, slope: f64 },
    Series(Vec<SeriesTerms>),
}

/// Pointwise lower and upper bounds on the value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelope {
    beta: f64,
    storage: StorageCost,
    lower: Lower,
}

/// Envelope and value at one knot; `margin` is the smaller of the two slacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub x: f64,
    pub ell: Option<f64>,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub rows: Vec<BoundRow>,
    pub min_margin: f64,
}

impl BoundCheck {
    /// CSV with header `x,lower,value,upper,margin`, or `x,ell,lower,value,upper,margin` in 2D.
    pub fn to_csv(&self) -> String {
        let two = self.rows.first().is_some_and(|r| r.ell.is_some());
        let mut out = String::from(if two {
            "x,ell,lower,value,upper,margin\n"
        } else {
            "x,lower,value,upper,margin\n"
        });
        for r in &self.rows {
            out.push_str(&fmt_f64(r.x));
            if let Some(l) = r.ell {
                out.push(',');
                out.push_str(&fmt_f64(l));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                fmt_f64(r.lower),
                fmt_f64(r.value),
                fmt_f64(r.upper),
                fmt_f64(r.margin)
            ));
        }
        out
    }
}

impl BoundEnvelope {
    pub fn lower(&self, x: f64, ell: f64) -> f64 {
        match &self.lower {
            Lower::Linear { slope, .. } => slope * x,
            Lower::Series(terms) => {
                let s = terms.iter().map(|t| t.sum(self.beta, ell)).fold(f64::NEG_INFINITY, f64::max);
                -s * x
            }
        }
    }

    pub fn upper(&self, x: f64, _ell: f64) -> f64 {
        self.storage.eval(x) / (1.0 - self.beta)
    }

    /// The per-κ series, empty for the revenue envelope.
    pub fn series(&self) -> &[SeriesTerms] {
        match &self.lower {
            Lower::Series(t) => t,
            Lower::Linear { .. } => &[],
        }
    }

    /// Largest successive-term ratio past the burn-in over all κ (0 for the revenue envelope).
    pub fn max_series_ratio(&self) -> f64 {
        self.series().iter().map(|t| t.max_ratio).fold(0.0, f64::max)
    }

    /// `(κ, E_κ[p])` pairs of the revenue envelope.
    pub fn kappa_means(&self) -> Vec<(usize, f64)> {
        match &self.lower {
            Lower::Linear { kappas, means, .. } => kappas.iter().copied().zip(means.iter().copied()).collect(),
            Lower::Series(_) => Vec::new(),
        }
    }

    /// Envelope and slack at every knot of `v`.
    pub fn check(&self, v: &ValueFn) -> Result<BoundCheck> {
        let mut rows = Vec::with_capacity(v.values().len());
        let mut push = |x: f64, ell: Option<f64>, value: f64| {
            let (lo, hi) = (self.lower(x, ell.unwrap_or(0.0)), self.upper(x, ell.unwrap_or(0.0)));
            rows.push(BoundRow {
                x,
                ell,
                lower: lo,
                value,
                upper: hi,
                margin: (value - lo).min(hi - value),
            });
        };
        match v {
            ValueFn::One(f) => {
                for (&x, &val) in f.grid().knots().iter().zip(f.values()) {
                    push(x, None, val);
                }
            }
            ValueFn::Two(f) => {
                if self.series().is_empty() {
                    return Err(Error::Shape("the revenue envelope has no log-price coordinate".into()));
                }
                let ells = f.ell_grid().knots();
                // The series depends on ell only; evaluate it once per knot.
                let sums: Vec<f64> = ells
                    .iter()
                    .map(|&l| self.series().iter().map(|t| t.sum(self.beta, l)).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                for (i, &x) in f.x_grid().knots().iter().enumerate() {
                    for (j, &l) in ells.iter().enumerate() {
                        let value = f.at(i, j);
                        let (lo, hi) = (-sums[j] * x, self.upper(x, l));
                        rows.push(BoundRow {
                            x,
                            ell: Some(l),
                            lower: lo,
                            value,
                            upper: hi,
                            margin: (value - lo).min(hi - value),
                        });
                    }
                }
            }
        }
        let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        Ok(BoundCheck { rows, min_margin })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("beta must lie strictly inside (0,1), got {beta}")))
    }
}

/// Revenue bounds `min_κ −E_κ[p]·x/(1−β) ≤ V(x) ≤ C(x)/(1−β)` over the given prefix measures.
pub fn revenue_bound_envelope(
    beta: f64,
    storage: StorageCost,
    measures_by_kappa: &[EmpiricalMeasure],
) -> Result<BoundEnvelope> {
    check_beta(beta)?;
    storage.validate()?;
    if measures_by_kappa.is_empty() {
        return Err(Error::Envelope("at least one measure is required".into()));
    }
    let kappas: Vec<usize> = measures_by_kappa.iter().map(EmpiricalMeasure::len).collect();
    let means: Vec<f64> = measures_by_kappa.iter().map(EmpiricalMeasure::mean).collect();
    if let Some(m) = means.iter().find(|m| !m.is_finite()) {
        return Err(Error::Envelope(format!("price mean is not finite ({m})")));
    }
    let slope = means
        .iter()
        .map(|m| -m / (1.0 - beta))
        .fold(f64::INFINITY, f64::min);
    Ok(BoundEnvelope {
        beta,
        storage,
        lower: Lower::Linear { kappas, means, slope },
    })
}

fn log_mean_exp(noise: &EmpiricalMeasure, s: f64, abs: bool) -> f64 {
    let m: CompensatedSum = noise
        .atoms()
        .iter()
        .zip(noise.weights())
        .map(|(&xi, &w)| w * (s * if abs { xi.abs() } else { xi }).exp())
        .collect();
    m.value().ln()
}

fn series_terms(beta: f64, fit: &KappaFit, ells: &[f64]) -> Result<SeriesTerms> {
    let alpha = fit.alpha;
    if !(alpha.abs() < 1.0) {
        return Err(Error::Envelope(format!(
            "the series diverges for alpha = {alpha} (kappa = {})",
            fit.kappa
        )));
    }
    let big_l = ells.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut log_moments = Vec::new();
    // Per knot: log of the current term and the running partial sum.
    let mut log_term = vec![0.0; ells.len()];
    let mut partial = vec![CompensatedSum::new(); ells.len()];
    let mut a_pow = 1.0; // α^τ for the next moment.
    let mut log_prod = 0.0;
    let mut max_ratio = 0.0f64;
    for t in 1..=MAX_TERMS {
        let lm = log_mean_exp(&fit.noise, a_pow, false);
        if !lm.is_finite() {
            return Err(Error::Envelope(format!("exponential moment overflow at term {t} (kappa = {})", fit.kappa)));
        }
        log_moments.push(lm);
        log_prod += lm;
        a_pow *= alpha;
        let log_beta = (t - 1) as f64 * beta.ln();
        for (j, &l) in ells.iter().enumerate() {
            let lt = log_beta + a_pow * l + log_prod;
            if t > RATIO_BURN_IN + 1 {
                max_ratio = max_ratio.max((lt - log_term[j]).exp());
            }
            log_term[j] = lt;
            partial[j].add(lt.exp());
        }
        // Every later ratio is at most β·exp(|α|^t |1−α| L)·E[exp(|α|^t |ξ|)].
        let r_bar = beta * (a_pow.abs() * (1.0 - alpha).abs() * big_l + log_mean_exp(&fit.noise, a_pow.abs(), true)).exp();
        if r_bar < 1.0 {
            let factor = r_bar / (1.0 - r_bar);
            let settled = log_term
                .iter()
                .zip(&partial)
                .all(|(&lt, p)| lt.exp() * factor <= SERIES_REL_TAIL * p.value());
            if settled {
                return Ok(SeriesTerms {
                    kappa: fit.kappa,
                    alpha,
                    log_moments,
                    max_ratio,
                });
            }
        }
    }
    Err(Error::Envelope(format!(
        "series did not settle within {MAX_TERMS} terms (kappa = {})",
        fit.kappa
    )))
}

/// Log-AR(1) bounds `min_κ −x·S_κ(ℓ) ≤ V(x, ℓ) ≤ C(x)/(1−β)`.
///
/// Each series is truncated once a geometric tail certificate puts the
/// remainder below `1e-10` of the partial sum at every knot of `ells`.
pub fn ar1_bound_envelope(
    beta: f64,
    storage: StorageCost,
    fits_by_kappa: &[KappaFit],
    ells: &[f64],
) -> Result<BoundEnvelope> {
    check_beta(beta)?;
    storage.validate()?;
    if fits_by_kappa.is_empty() {
        return Err(Error::Envelope("at least one fit is required".into()));
    }
    if ells.is_empty() {
        return Err(Error::Envelope("at least one log-price knot is required".into()));
    }
    let terms = fits_by_kappa
        .iter()
        .map(|f| series_terms(beta, f, ells))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundEnvelope {
        beta,
        storage,
        lower: Lower::Series(terms),
    })
}
