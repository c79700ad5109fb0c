use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::empirical::EmpiricalMeasure;
use super::normal::inverse_normal_cdf;
use crate::{Error, Result};

/// A scalar outcome distribution.
///
/// Parameters are in the outcome's own units. Every variant can be sampled by
/// inverse CDF from a single uniform draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistributionSpec {
    PointMass(f64),
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Levy { location: f64, scale: f64 },
    Normal { mu: f64, sigma: f64 },
    /// An atomic measure loaded from `source` (a CSV path or inline label).
    Empirical { source: String, measure: EmpiricalMeasure },
}

/// Closed interval of admissible outcomes (Ξ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeSpace {
    pub low: f64,
    pub high: f64,
}

impl OutcomeSpace {
    pub const REAL_LINE: OutcomeSpace = OutcomeSpace {
        low: f64::NEG_INFINITY,
        high: f64::INFINITY,
    };
    pub const NONNEGATIVE: OutcomeSpace = OutcomeSpace {
        low: 0.0,
        high: f64::INFINITY,
    };

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and strictly positive, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn normal(mu: f64, sigma: f64) -> Self {
        DistributionSpec::Normal { mu, sigma }
    }

    pub fn levy_standard() -> Self {
        DistributionSpec::Levy {
            location: 0.0,
            scale: 1.0,
        }
    }

    pub fn empirical(measure: EmpiricalMeasure) -> Self {
        DistributionSpec::Empirical {
            source: "inline".to_string(),
            measure,
        }
    }

    /// Checks the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::PointMass(v) => finite("point mass location", *v),
            DistributionSpec::Uniform { low, high } => {
                finite("uniform low", *low)?;
                finite("uniform high", *high)?;
                if low < high {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("uniform requires low < high, got ({low}, {high})")))
                }
            }
            DistributionSpec::Exponential { rate } => positive("exponential rate", *rate),
            DistributionSpec::LogNormal { mu, sigma } | DistributionSpec::Normal { mu, sigma } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)
            }
            DistributionSpec::Levy { location, scale } => {
                finite("levy location", *location)?;
                positive("levy scale", *scale)
            }
            DistributionSpec::Empirical { .. } => Ok(()),
        }
    }

    /// Checks the invariants plus, for atomic kinds, that the support lies in `space`.
    pub fn validate_in(&self, space: OutcomeSpace) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.support();
        if lo < space.low || hi > space.high {
            return Err(Error::Parameter(format!(
                "support [{lo}, {hi}] of {self} leaves the outcome space [{}, {}]",
                space.low, space.high
            )));
        }
        Ok(())
    }

    /// Closed hull of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionSpec::PointMass(v) => (*v, *v),
            DistributionSpec::Uniform { low, high } => (*low, *high),
            DistributionSpec::Exponential { .. } | DistributionSpec::LogNormal { .. } => (0.0, f64::INFINITY),
            DistributionSpec::Levy { location, .. } => (*location, f64::INFINITY),
            DistributionSpec::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistributionSpec::Empirical { measure, .. } => measure.support(),
        }
    }

    /// Mean, or `None` when the distribution is not integrable.
    pub fn mean(&self) -> Option<f64> {
        match self {
            DistributionSpec::PointMass(v) => Some(*v),
            DistributionSpec::Uniform { low, high } => Some(0.5 * (low + high)),
            DistributionSpec::Exponential { rate } => Some(1.0 / rate),
            DistributionSpec::LogNormal { mu, sigma } => Some((mu + 0.5 * sigma * sigma).exp()),
            DistributionSpec::Levy { .. } => None,
            DistributionSpec::Normal { mu, .. } => Some(*mu),
            DistributionSpec::Empirical { measure, .. } => Some(measure.mean()),
        }
    }

    /// Standard deviation, or `None` when the second moment is infinite.
    pub fn std_dev(&self) -> Option<f64> {
        match self {
            DistributionSpec::PointMass(_) => Some(0.0),
            DistributionSpec::Uniform { low, high } => Some((high - low) / 12f64.sqrt()),
            DistributionSpec::Exponential { rate } => Some(1.0 / rate),
            DistributionSpec::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                Some(((s2.exp() - 1.0) * (2.0 * mu + s2).exp()).sqrt())
            }
            DistributionSpec::Levy { .. } => None,
            DistributionSpec::Normal { sigma, .. } => Some(*sigma),
            DistributionSpec::Empirical { measure, .. } => {
                let m = measure.mean();
                let var: f64 = measure
                    .atoms()
                    .iter()
                    .zip(measure.weights())
                    .map(|(a, w)| w * (a - m) * (a - m))
                    .sum();
                Some(var.sqrt())
            }
        }
    }

    /// Whether E[exp(X)] is finite.
    pub fn has_finite_exp_moment(&self) -> bool {
        match self {
            DistributionSpec::PointMass(_)
            | DistributionSpec::Uniform { .. }
            | DistributionSpec::Normal { .. }
            | DistributionSpec::Empirical { .. } => true,
            DistributionSpec::Exponential { rate } => *rate > 1.0,
            DistributionSpec::LogNormal { .. } | DistributionSpec::Levy { .. } => false,
        }
    }

    /// Inverse CDF at `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            DistributionSpec::PointMass(v) => *v,
            DistributionSpec::Uniform { low, high } => low + (high - low) * u,
            // -ln(u) has the same law as -ln(1-u) and keeps full precision near 0.
            DistributionSpec::Exponential { rate } => -u.ln() / rate,
            DistributionSpec::LogNormal { mu, sigma } => (mu + sigma * inverse_normal_cdf(u)).exp(),
            DistributionSpec::Levy { location, scale } => {
                // X = c / (Phi^{-1}(1 - u/2))^2, evaluated through the lower tail
                // Phi^{-1}(u/2) = -Phi^{-1}(1 - u/2) to avoid cancellation.
                let z = inverse_normal_cdf(0.5 * u);
                location + scale / (z * z)
            }
            DistributionSpec::Normal { mu, sigma } => mu + sigma * inverse_normal_cdf(u),
            DistributionSpec::Empirical { measure, .. } => measure.quantile(u),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::PointMass(v) => write!(f, "pointmass({v:?})"),
            DistributionSpec::Uniform { low, high } => write!(f, "uniform({low:?},{high:?})"),
            DistributionSpec::Exponential { rate } => write!(f, "exponential(rate={rate:?})"),
            DistributionSpec::LogNormal { mu, sigma } => write!(f, "lognormal({mu:?},{sigma:?})"),
            DistributionSpec::Levy { location, scale } => write!(f, "levy({location:?},{scale:?})"),
            DistributionSpec::Normal { mu, sigma } => write!(f, "normal({mu:?},{sigma:?})"),
            DistributionSpec::Empirical { source, .. } => write!(f, "empirical({source})"),
        }
    }
}

/// Parses `name(arg, key=value, ...)`; positional and keyword arguments may be mixed.
fn split_call(s: &str) -> Result<(String, Vec<(Option<String>, String)>)> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| Error::Parse(format!("expected `name(args)`, got `{s}`")))?;
    if !s.ends_with(')') {
        return Err(Error::Parse(format!("missing closing parenthesis in `{s}`")));
    }
    let name = s[..open].trim().to_ascii_lowercase();
    let inner = &s[open + 1..s.len() - 1];
    let mut args = Vec::new();
    if !inner.trim().is_empty() {
        for part in inner.split(',') {
            let part = part.trim();
            match part.split_once('=') {
                Some((k, v)) => args.push((Some(k.trim().to_ascii_lowercase()), v.trim().to_string())),
                None => args.push((None, part.to_string())),
            }
        }
    }
    Ok((name, args))
}

fn bind(name: &str, args: &[(Option<String>, String)], params: &[(&str, Option<f64>)]) -> Result<Vec<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; params.len()];
    let mut next_positional = 0;
    for (key, raw) in args {
        let idx = match key {
            Some(k) => params
                .iter()
                .position(|(p, _)| p == k)
                .ok_or_else(|| Error::Parse(format!("{name}: unknown parameter `{k}`")))?,
            None => {
                let i = next_positional;
                next_positional += 1;
                if i >= params.len() {
                    return Err(Error::Parse(format!("{name}: too many arguments")));
                }
                i
            }
        };
        if out[idx].is_some() {
            return Err(Error::Parse(format!("{name}: parameter `{}` given twice", params[idx].0)));
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Parse(format!("{name}: `{raw}` is not a number")))?;
        out[idx] = Some(v);
    }
    out.iter()
        .zip(params)
        .map(|(v, (p, default))| {
            v.or(*default)
                .ok_or_else(|| Error::Parse(format!("{name}: missing parameter `{p}`")))
        })
        .collect()
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Accepts strings like `exponential(rate=1.0)`, `levy(0,1)`, `pointmass(2.0)`,
    /// `normal(mu=0, sigma=0.1)` or `empirical(path/to/atoms.csv)`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let spec = match name.as_str() {
            "pointmass" | "point_mass" | "delta" => {
                let v = bind(&name, &args, &[("value", None)])?;
                DistributionSpec::PointMass(v[0])
            }
            "uniform" => {
                let v = bind(&name, &args, &[("low", None), ("high", None)])?;
                DistributionSpec::Uniform { low: v[0], high: v[1] }
            }
            "exponential" | "exp" => {
                let v = bind(&name, &args, &[("rate", Some(1.0))])?;
                DistributionSpec::Exponential { rate: v[0] }
            }
            "lognormal" => {
                let v = bind(&name, &args, &[("mu", None), ("sigma", None)])?;
                DistributionSpec::LogNormal { mu: v[0], sigma: v[1] }
            }
            "levy" => {
                let v = bind(&name, &args, &[("location", Some(0.0)), ("scale", Some(1.0))])?;
                DistributionSpec::Levy {
                    location: v[0],
                    scale: v[1],
                }
            }
            "normal" | "gaussian" => {
                let v = bind(&name, &args, &[("mu", None), ("sigma", None)])?;
                DistributionSpec::Normal { mu: v[0], sigma: v[1] }
            }
            "empirical" => {
                let path = match args.as_slice() {
                    [(None, p)] => p.clone(),
                    [(Some(k), p)] if k == "path" => p.clone(),
                    _ => return Err(Error::Parse("empirical(path) takes exactly one path".into())),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Parse(format!("empirical({path}): {e}")))?;
                DistributionSpec::Empirical {
                    source: path,
                    measure: EmpiricalMeasure::from_csv(&text)?,
                }
            }
            other => return Err(Error::Parse(format!("unknown distribution `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
