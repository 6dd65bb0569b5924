//! Exact oracles for small polyhedra by brute-force vertex enumeration.
//!
//! Everything here is exponential in the dimension and meant for instances
//! with a handful of variables, where it serves as ground truth.

use crate::linalg::{self, RMatrix, RVector};

/// `{x : a x ≤ b, eq_a x = eq_b}`.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    pub a: RMatrix,
    pub b: RVector,
    pub eq_a: RMatrix,
    pub eq_b: RVector,
}

impl Polyhedron {
    pub fn new(a: RMatrix, b: RVector) -> Self {
        let n = a.ncols();
        Self { a, b, eq_a: RMatrix::zeros(0, n), eq_b: RVector::zeros(0) }
    }

    pub fn with_equalities(mut self, eq_a: RMatrix, eq_b: RVector) -> Self {
        self.eq_a = eq_a;
        self.eq_b = eq_b;
        self
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn contains(&self, x: &RVector, tol: f64) -> bool {
        let ub = (&self.a * x - &self.b).iter().all(|&r| r <= tol);
        let eq = self.eq_a.nrows() == 0 || (&self.eq_a * x - &self.eq_b).amax() <= tol;
        ub && eq
    }

    /// Reparametrize the equalities away: `x = x0 + n u`. `None` when the
    /// equalities are inconsistent.
    fn parametrize(&self, tol: f64) -> Option<(RVector, RMatrix)> {
        let n = self.dim();
        if self.eq_a.nrows() == 0 {
            return Some((RVector::zeros(n), RMatrix::identity(n, n)));
        }
        let x0 = linalg::lstsq(&self.eq_a, &self.eq_b, 1e-12);
        if (&self.eq_a * &x0 - &self.eq_b).amax() > tol {
            return None;
        }
        Some((x0, linalg::nullspace(&self.eq_a, 1e-10)))
    }

    /// All vertices (deduplicated). Empty for an empty or vertex-free set.
    pub fn vertices(&self, tol: f64) -> Vec<RVector> {
        let Some((x0, basis)) = self.parametrize(tol) else {
            return Vec::new();
        };
        let k = basis.ncols();
        let a = &self.a * &basis;
        let b = &self.b - &self.a * &x0;
        if k == 0 {
            return if b.iter().all(|&r| r >= -tol) { vec![x0] } else { Vec::new() };
        }
        let rows = a.nrows();
        let mut out: Vec<RVector> = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        if rows < k {
            return out;
        }
        loop {
            let mut m = RMatrix::zeros(k, k);
            let mut rhs = RVector::zeros(k);
            for (r, &i) in idx.iter().enumerate() {
                m.set_row(r, &a.row(i));
                rhs[r] = b[i];
            }
            if let Some(u) = m.clone().lu().solve(&rhs) {
                let well_posed = (&m * &u - &rhs).amax() <= 1e-9 * (1.0 + rhs.amax());
                if well_posed && (&a * &u - &b).iter().all(|&r| r <= tol) {
                    let x = &x0 + &basis * &u;
                    if !out.iter().any(|v| (v - &x).amax() <= tol) {
                        out.push(x);
                    }
                }
            }
            if !next_combination(&mut idx, rows) {
                break;
            }
        }
        out
    }

    /// Minimize `cᵀx`; the minimum of a linear function over a pointed
    /// polyhedron bounded in that direction is attained at a vertex.
    pub fn minimize(&self, c: &RVector, tol: f64) -> Option<(f64, RVector)> {
        self.vertices(tol)
            .into_iter()
            .map(|v| (c.dot(&v), v))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
