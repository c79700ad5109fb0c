use serde::{Deserialize, Serialize};

use super::sum::CompensatedSum;
use crate::{fmt_f64, Error, Result};

/// Finite atomic probability measure.
///
/// Atoms keep insertion order; every reduction walks them in that order with
/// compensated accumulation, so results do not depend on thread layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        EmpiricalMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<EmpiricalMeasure> for RawMeasure {
    fn from(m: EmpiricalMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("an empirical measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = atoms.iter().position(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("atom {i} is not finite: {}", atoms[i])));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!("weight {i} is negative or not finite: {}", weights[i])));
        }
        let total: f64 = weights.iter().copied().collect::<CompensatedSum>().value();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(EmpiricalMeasure { atoms, weights })
    }

    /// The uniform measure (1/n) Σ δ_{values_i}.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("cannot build an empirical measure from no samples".into()));
        }
        let w = 1.0 / values.len() as f64;
        let n = values.len();
        // 1/n rounded n times can drift past the tolerance only for n far beyond memory.
        EmpiricalMeasure::new(values, vec![w; n])
    }

    pub fn dirac(v: f64) -> Self {
        EmpiricalMeasure {
            atoms: vec![v],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> (f64, f64) {
        self.atoms
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)))
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|a| a).expect("atoms are finite")
    }

    /// The uniform measure on the first `n` atoms (the nested-prefix empirical measure).
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Domain(format!("prefix length {n} outside 1..={}", self.len())));
        }
        EmpiricalMeasure::uniform(self.atoms[..n].to_vec())
    }

    /// Returns the measure with every atom mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        EmpiricalMeasure::new(self.atoms.iter().map(|&a| f(a)).collect(), self.weights.clone())
    }

    fn weighted_sum(&self, f: impl Fn(f64) -> f64, keep: impl Fn(f64) -> bool) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (index, (&atom, &w)) in self.atoms.iter().zip(&self.weights).enumerate() {
            let value = f(atom);
            if !value.is_finite() {
                return Err(Error::Evaluation { atom, index, value });
            }
            if keep(value) {
                acc.add(w * value);
            }
        }
        Ok(acc.value())
    }

    /// Σ w_i f(a_i) in atom order.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.weighted_sum(f, |_| true)
    }

    /// Σ w_i f(a_i) 𝟙{f(a_i) ≤ alpha}.
    pub fn truncated_lower_expectation(&self, f: impl Fn(f64) -> f64, alpha: f64) -> Result<f64> {
        self.weighted_sum(f, |v| v <= alpha)
    }

    /// Σ w_i f(a_i) 𝟙{f(a_i) ≥ alpha}.
    pub fn truncated_upper_expectation(&self, f: impl Fn(f64) -> f64, alpha: f64) -> Result<f64> {
        self.weighted_sum(f, |v| v >= alpha)
    }

    /// Quantile of the measure: the smallest atom whose cumulative weight reaches `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.atoms[a].total_cmp(&self.atoms[b]));
        let mut cum = 0.0;
        for &i in &order {
            cum += self.weights[i];
            if cum >= u {
                return self.atoms[i];
            }
        }
        self.atoms[*order.last().expect("nonempty")]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("atom,weight\n");
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            out.push_str(&fmt_f64(*a));
            out.push(',');
            out.push_str(&fmt_f64(*w));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("atom,weight") => {}
            other => return Err(Error::Parse(format!("expected header `atom,weight`, got {other:?}"))),
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let (a, w) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two fields", lineno + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            atoms.push(parse(a)?);
            weights.push(parse(w)?);
        }
        EmpiricalMeasure::new(atoms, weights)
    }
}

/// The empirical measure of a sample: atoms in sample order, weights 1/n.
pub fn empirical_from_samples(values: &[f64]) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::uniform(values.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_pair() {
        let m = empirical_from_samples(&[2.0]).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        let m = empirical_from_samples(&[1.0, 3.0]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_eq!(m.expectation(|x| x).unwrap(), 2.0);
    }

    #[test]
    fn empty_sample_is_domain_error() {
        assert!(matches!(empirical_from_samples(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn dirac_square() {
        assert_eq!(EmpiricalMeasure::dirac(2.0).expectation(|x| x * x).unwrap(), 4.0);
    }

    #[test]
    fn nonfinite_integrand_names_atom() {
        let m = EmpiricalMeasure::uniform(vec![1.0, 0.0, 2.0]).unwrap();
        match m.expectation(|x| 1.0 / x) {
            Err(Error::Evaluation { atom, index, .. }) => {
                assert_eq!(atom, 0.0);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncations_on_two_atoms() {
        let m = EmpiricalMeasure::uniform(vec![-2.0, 1.0]).unwrap();
        assert_eq!(m.truncated_lower_expectation(|x| x, 0.0).unwrap(), -1.0);
        assert_eq!(m.truncated_upper_expectation(|x| x, 0.0).unwrap(), 0.5);
        assert_eq!(m.truncated_lower_expectation(|x| x.abs(), -1.0).unwrap(), 0.0);
        assert_eq!(m.truncated_upper_expectation(|x| -x.abs(), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(EmpiricalMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![0.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let m = EmpiricalMeasure::new(vec![0.1, 1.0 / 3.0, -7.25e-300], vec![0.25, 0.5, 0.25]).unwrap();
        let text = m.to_csv();
        assert!(text.starts_with("atom,weight\n"));
        assert_eq!(EmpiricalMeasure::from_csv(&text).unwrap(), m);
    }

    #[test]
    fn prefix_reweights() {
        let m = EmpiricalMeasure::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = m.prefix(2).unwrap();
        assert_eq!(p.atoms(), &[1.0, 2.0]);
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert!(m.prefix(5).is_err());
    }

    #[test]
    fn quantile_of_atoms() {
        let m = EmpiricalMeasure::uniform(vec![3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(m.quantile(0.1), 1.0);
        assert_eq!(m.quantile(0.5), 2.0);
        assert_eq!(m.quantile(0.99), 4.0);
    }
}
