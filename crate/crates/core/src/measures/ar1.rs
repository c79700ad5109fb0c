use serde::{Deserialize, Serialize};

use super::dist::DistributionSpec;
use super::empirical::EmpiricalMeasure;
use super::stream::SampleStream;
use super::sum::compensated_sum;
use crate::{Error, Result};

/// Least-squares fit of `ℓ_{t+1} ≈ α ℓ_t + μ` and the induced residual measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Fit {
    pub alpha_hat: f64,
    pub mu_hat: f64,
    pub residuals: EmpiricalMeasure,
    /// Number of transitions used (one fewer than the number of prices).
    pub n: usize,
}

/// OLS with intercept; residuals are `ℓ_{t+1} − α̂ ℓ_t` (intercept left out).
pub fn ar1_ols_fit(log_prices: &[f64]) -> Result<Ar1Fit> {
    ar1_ols_fit_with(log_prices, false)
}

/// As [`ar1_ols_fit`], optionally subtracting the fitted intercept from the residuals.
pub fn ar1_ols_fit_with(log_prices: &[f64], residuals_include_intercept: bool) -> Result<Ar1Fit> {
    if log_prices.len() < 3 {
        return Err(Error::Domain(format!(
            "AR(1) fit needs at least 3 prices, got {}",
            log_prices.len()
        )));
    }
    if let Some(i) = log_prices.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("log price {i} is not finite")));
    }
    let n = log_prices.len() - 1;
    let xs = &log_prices[..n];
    let ys = &log_prices[1..];
    let x_mean = compensated_sum(xs.iter().copied()) / n as f64;
    let y_mean = compensated_sum(ys.iter().copied()) / n as f64;
    let sxx = compensated_sum(xs.iter().map(|x| (x - x_mean) * (x - x_mean)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - x_mean) * (y - y_mean)));
    let scale = compensated_sum(xs.iter().map(|x| x * x)).max(f64::MIN_POSITIVE);
    if sxx <= 1e-14 * scale || sxx == 0.0 {
        return Err(Error::Singular("the regressor sequence is constant".into()));
    }
    let alpha_hat = sxy / sxx;
    let mu_hat = y_mean - alpha_hat * x_mean;
    let shift = if residuals_include_intercept { mu_hat } else { 0.0 };
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - alpha_hat * x - shift).collect();
    Ok(Ar1Fit {
        alpha_hat,
        mu_hat,
        residuals: EmpiricalMeasure::uniform(residuals)?,
        n,
    })
}

/// Simulates `[ℓ_1, …, ℓ_{n+1}]` from `ℓ_{t+1} = α ℓ_t + ξ_t` with seeded noise.
pub fn ar1_simulate(alpha: f64, ell1: f64, noise: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie strictly inside (0,1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::Domain("simulation length must be at least 1".into()));
    }
    let xi = SampleStream::new(seed, noise.clone()).sample(n)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut ell = ell1;
    out.push(ell);
    for e in xi {
        ell = alpha * ell + e;
        out.push(ell);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_halving() {
        let path = ar1_simulate(0.5, 2.0, &DistributionSpec::PointMass(0.0), 3, 1).unwrap();
        assert_eq!(path, vec![2.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn converges_to_fixed_point() {
        let path = ar1_simulate(0.8, 0.0, &DistributionSpec::PointMass(0.2), 400, 1).unwrap();
        assert!((path.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_outside_unit_interval_rejected() {
        for a in [0.0, 1.0, -0.3, 1.2] {
            assert!(matches!(
                ar1_simulate(a, 0.0, &DistributionSpec::PointMass(0.0), 3, 1),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn noiseless_fit_recovers_alpha() {
        let path = ar1_simulate(0.8, 1.0, &DistributionSpec::PointMass(0.0), 30, 1).unwrap();
        let fit = ar1_ols_fit(&path).unwrap();
        assert!((fit.alpha_hat - 0.8).abs() < 1e-10);
        assert!(fit.mu_hat.abs() < 1e-10);
        assert_eq!(fit.n, 30);
        assert_eq!(fit.residuals.len(), 30);
        assert!(fit.residuals.atoms().iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn constant_regressor_is_singular() {
        assert!(matches!(ar1_ols_fit(&[1.0, 1.0, 1.0, 1.0]), Err(Error::Singular(_))));
        assert!(ar1_ols_fit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn intercept_flag_shifts_residuals() {
        let path = [0.0, 1.0, 0.5, 2.0, 1.0, 1.5];
        let a = ar1_ols_fit_with(&path, false).unwrap();
        let b = ar1_ols_fit_with(&path, true).unwrap();
        for (x, y) in a.residuals.atoms().iter().zip(b.residuals.atoms()) {
            assert!((x - y - a.mu_hat).abs() < 1e-14);
        }
        assert!(b.residuals.mean().abs() < 1e-14);
    }
}
