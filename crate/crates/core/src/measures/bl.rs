use super::empirical::EmpiricalMeasure;
use crate::{Error, Result};

/// Bounded 1-Lipschitz ramp `x ↦ s·clamp((x − c)/w, −1, 1)` with `s = min(1, w)`.
///
/// For `w < 1` the raw ramp has slope `1/w`; shrinking its height by `w`
/// restores the unit Lipschitz constant while keeping the breakpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
}

impl TestFunction {
    pub fn ramp(center: f64, width: f64) -> Self {
        TestFunction { center, width }
    }

    /// `clamp(x, 0, 1)` up to an additive constant.
    pub fn unit_clamp() -> Self {
        TestFunction::ramp(0.5, 0.5)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.width.min(1.0) * ((x - self.center) / self.width).clamp(-1.0, 1.0)
    }
}

/// A finite family of test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub functions: Vec<TestFunction>,
}

pub const DEFAULT_CENTERS: usize = 21;
pub const DEFAULT_WIDTHS: [f64; 3] = [0.5, 1.0, 2.0];

impl TestFamily {
    /// Ramps centred on a 21-point grid across `[lo, hi]` with widths 0.5, 1 and 2.
    pub fn over_range(lo: f64, hi: f64) -> Self {
        let mut functions = Vec::with_capacity(DEFAULT_CENTERS * DEFAULT_WIDTHS.len());
        for i in 0..DEFAULT_CENTERS {
            let c = lo + (hi - lo) * i as f64 / (DEFAULT_CENTERS - 1) as f64;
            for &w in &DEFAULT_WIDTHS {
                functions.push(TestFunction::ramp(c, w));
            }
        }
        TestFamily { functions }
    }

    /// The default family over the pooled support of `p` and `q`.
    pub fn default_for(p: &EmpiricalMeasure, q: &EmpiricalMeasure) -> Self {
        let (a, b) = p.support();
        let (c, d) = q.support();
        TestFamily::over_range(a.min(c), b.max(d))
    }
}

/// `|E_p[f] − E_q[f]|` for every member of the family, in family order.
pub fn discrepancies(p: &EmpiricalMeasure, q: &EmpiricalMeasure, family: &TestFamily) -> Result<Vec<f64>> {
    family
        .functions
        .iter()
        .map(|f| Ok((p.expectation(|x| f.eval(x))? - q.expectation(|x| f.eval(x))?).abs()))
        .collect()
}

/// Largest discrepancy over the family: a lower bound on the bounded-Lipschitz metric.
pub fn bounded_lipschitz_distance(p: &EmpiricalMeasure, q: &EmpiricalMeasure, family: &TestFamily) -> Result<f64> {
    if family.functions.is_empty() {
        return Err(Error::Domain("the test-function family is empty".into()));
    }
    Ok(discrepancies(p, q, family)?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_measures_have_zero_distance() {
        let p = EmpiricalMeasure::uniform(vec![0.3, -1.0, 2.5]).unwrap();
        let fam = TestFamily::default_for(&p, &p);
        assert_eq!(bounded_lipschitz_distance(&p, &p, &fam).unwrap(), 0.0);
    }

    #[test]
    fn unit_clamp_separates_zero_and_one() {
        let p = EmpiricalMeasure::dirac(0.0);
        let q = EmpiricalMeasure::dirac(1.0);
        let fam = TestFamily {
            functions: vec![TestFunction::unit_clamp()],
        };
        assert_eq!(bounded_lipschitz_distance(&p, &q, &fam).unwrap(), 1.0);
    }

    #[test]
    fn empty_family_is_domain_error() {
        let p = EmpiricalMeasure::dirac(0.0);
        let fam = TestFamily { functions: vec![] };
        assert!(matches!(bounded_lipschitz_distance(&p, &p, &fam), Err(Error::Domain(_))));
    }

    #[test]
    fn ramps_are_one_lipschitz_and_bounded() {
        for &w in &[0.1, 0.5, 1.0, 2.0, 7.0] {
            let f = TestFunction::ramp(0.2, w);
            let xs: Vec<f64> = (0..400).map(|i| -5.0 + i as f64 * 0.025).collect();
            for pair in xs.windows(2) {
                let slope = (f.eval(pair[1]) - f.eval(pair[0])).abs() / (pair[1] - pair[0]);
                assert!(slope <= 1.0 + 1e-12);
            }
            assert!(xs.iter().all(|&x| f.eval(x).abs() <= 1.0));
        }
    }

    #[test]
    fn default_family_size() {
        assert_eq!(TestFamily::over_range(0.0, 1.0).functions.len(), 63);
    }
}
