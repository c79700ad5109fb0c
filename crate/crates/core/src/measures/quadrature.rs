//! Gauss rules turned into atomic reference measures.

use std::f64::consts::PI;

use super::dist::DistributionSpec;
use super::empirical::EmpiricalMeasure;
use super::sum::compensated_sum;
use crate::{Error, Result};

const NEWTON_EPS: f64 = 1e-14;
const NEWTON_MAX: usize = 100;

fn newton_failed(rule: &str, i: usize) -> Error {
    Error::Domain(format!("{rule} rule: Newton iteration for node {i} did not converge"))
}

/// Gauss-Laguerre nodes and weights for the weight `e^{-t}` on `[0, ∞)`, ascending.
pub fn gauss_laguerre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("quadrature needs at least one node".into()));
    }
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - x[i - 2])
            }
        };
        let mut converged = false;
        let (mut p2, mut pp) = (0.0, 0.0);
        for _ in 0..NEWTON_MAX {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(newton_failed("Laguerre", i));
        }
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    Ok((x, w))
}

/// Gauss-Hermite nodes and weights for the weight `e^{-t²}` on ℝ, ascending.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("quadrature needs at least one node".into()));
    }
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut converged = false;
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(newton_failed("Hermite", i));
        }
        // NR orders the positive roots first; store them mirrored.
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // The loop above fills x descending from the left; flip to ascending.
    x.reverse();
    w.reverse();
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("quadrature needs at least one node".into()));
    }
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(newton_failed("Legendre", i));
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

fn normalized(atoms: Vec<f64>, weights: Vec<f64>) -> Result<EmpiricalMeasure> {
    let total = compensated_sum(weights.iter().copied());
    EmpiricalMeasure::new(atoms, weights.into_iter().map(|w| w / total).collect())
}

/// Deterministic atomic approximation of `dist` by an `n`-node Gauss rule.
///
/// Exponential uses Laguerre nodes, Normal and LogNormal use Hermite nodes
/// (the latter through the log transform), Uniform uses Legendre nodes. A
/// point mass maps to itself and an empirical measure is returned unchanged.
/// Lévy laws have no mean and are refused.
pub fn quadrature_measure(dist: &DistributionSpec, n: usize) -> Result<EmpiricalMeasure> {
    dist.validate()?;
    match dist {
        DistributionSpec::PointMass(v) => Ok(EmpiricalMeasure::dirac(*v)),
        DistributionSpec::Empirical { measure, .. } => Ok(measure.clone()),
        DistributionSpec::Exponential { rate } => {
            let (t, w) = gauss_laguerre(n)?;
            normalized(t.into_iter().map(|t| t / rate).collect(), w)
        }
        DistributionSpec::Normal { mu, sigma } => {
            let (t, w) = gauss_hermite(n)?;
            normalized(t.into_iter().map(|t| mu + sigma * 2f64.sqrt() * t).collect(), w)
        }
        DistributionSpec::LogNormal { mu, sigma } => {
            let (t, w) = gauss_hermite(n)?;
            normalized(t.into_iter().map(|t| (mu + sigma * 2f64.sqrt() * t).exp()).collect(), w)
        }
        DistributionSpec::Uniform { low, high } => {
            let (t, w) = gauss_legendre(n)?;
            normalized(t.into_iter().map(|t| low + 0.5 * (high - low) * (t + 1.0)).collect(), w)
        }
        DistributionSpec::Levy { .. } => Err(Error::NonIntegrable(format!(
            "{dist} has no finite mean, so no reference measure exists"
        ))),
    }
}
