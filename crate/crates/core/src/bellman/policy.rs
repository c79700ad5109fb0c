use crate::fmt_f64;

/// Argmin decisions per (grid state, atom).
///
/// Decisions are stored state-major: all atoms of state 0, then state 1, and
/// so on, where states run over inventory knots and, in 2D, log-price knots
/// within each inventory knot.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTable {
    xs: Vec<f64>,
    ells: Option<Vec<f64>>,
    atoms: Vec<f64>,
    ys: Vec<f64>,
}

/// One row of a [`DecisionTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRow {
    pub x: f64,
    pub ell: Option<f64>,
    pub xi: f64,
    pub y: f64,
}

impl DecisionTable {
    pub(crate) fn new(xs: &[f64], ells: Option<Vec<f64>>, atoms: Vec<f64>, ys: Vec<f64>) -> Self {
        let n_ell = ells.as_ref().map_or(1, Vec::len);
        assert_eq!(ys.len(), xs.len() * n_ell * atoms.len(), "decision table shape");
        DecisionTable {
            xs: xs.to_vec(),
            ells,
            atoms,
            ys,
        }
    }

    fn n_ell(&self) -> usize {
        self.ells.as_ref().map_or(1, Vec::len)
    }

    /// Decision at inventory knot `k`, log-price knot `j` (0 in 1D) and atom `i`.
    pub fn get(&self, k: usize, j: usize, i: usize) -> f64 {
        self.ys[(k * self.n_ell() + j) * self.atoms.len() + i]
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = DecisionRow> + '_ {
        let na = self.atoms.len();
        let nl = self.n_ell();
        self.ys.iter().enumerate().map(move |(idx, &y)| {
            let i = idx % na;
            let state = idx / na;
            let (k, j) = (state / nl, state % nl);
            DecisionRow {
                x: self.xs[k],
                ell: self.ells.as_ref().map(|e| e[j]),
                xi: self.atoms[i],
                y,
            }
        })
    }

    /// CSV with header `x,xi,y`, or `x,ell,xi,y` in 2D.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.ells.is_some() { "x,ell,xi,y\n" } else { "x,xi,y\n" });
        for r in self.rows() {
            out.push_str(&fmt_f64(r.x));
            if let Some(l) = r.ell {
                out.push(',');
                out.push_str(&fmt_f64(l));
            }
            out.push_str(&format!(",{},{}\n", fmt_f64(r.xi), fmt_f64(r.y)));
        }
        out
    }
}
