//! Concrete operator systems `S ⊆ M_d`, their matrix levels `M_n(S)`, and the
//! induced cones and norms.
//!
//! An element of `M_n(S)` is stored as one `n×n` coefficient matrix per basis
//! element, `x = Σ_k coeffs[k] ⊗ B_k`, together with its `nd×nd` realization.
//! All cone and norm queries go through the realization.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    pub eig_tol: f64,
    pub feas_tol: f64,
    pub bisect_tol: f64,
    pub dedup_tol: f64,
    /// Highest matrix level examined (`N_max`).
    pub level_cap: usize,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eig_tol: 1e-9,
            feas_tol: 1e-8,
            bisect_tol: 1e-9,
            dedup_tol: 1e-7,
            level_cap: 3,
            sample_count: 200,
            seed: 0,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eig_tol", self.eig_tol),
            ("feas_tol", self.feas_tol),
            ("bisect_tol", self.bisect_tol),
            ("dedup_tol", self.dedup_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidTolerance(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.level_cap == 0 {
            return Err(Error::InvalidTolerance("level_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A validated `*`-closed subspace of `M_d`.
#[derive(Debug, Clone)]
pub struct OperatorSystemSpec {
    name: String,
    ambient_dim: usize,
    basis: Vec<CMatrix>,
    /// Orthonormal (real Frobenius) Hermitian basis; a real basis of `S^sa`
    /// and a complex basis of `S`.
    hermitian_basis: Vec<CMatrix>,
    /// Row `j` expresses `hermitian_basis[j]` in the raw basis.
    herm_in_raw: CMatrix,
    /// Orthonormal complex basis of `S`, rows of `orth_in_raw` express it in the raw basis.
    orth_basis: Vec<CMatrix>,
    orth_in_raw: CMatrix,
    tolerances: ToleranceConfig,
}

impl PartialEq for OperatorSystemSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ambient_dim == other.ambient_dim && self.basis == other.basis
    }
}

/// Build and validate an operator system from a raw basis.
pub fn build_system(name: &str, raw_basis: Vec<CMatrix>, tolerances: ToleranceConfig) -> Result<OperatorSystemSpec> {
    tolerances.validate()?;
    if raw_basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let d = raw_basis[0].nrows();
    for (index, b) in raw_basis.iter().enumerate() {
        if b.nrows() != d || b.ncols() != d {
            return Err(Error::BadBasisShape { index, rows: b.nrows(), cols: b.ncols(), dim: d });
        }
        if !linalg::all_finite(b) {
            return Err(Error::NonFinite { index });
        }
    }
    if d == 0 {
        return Err(Error::BadBasisShape { index: 0, rows: 0, cols: 0, dim: 0 });
    }
    let m = raw_basis.len();
    let tol = tolerances.dedup_tol;

    // linear independence over C
    let vecs = vectorize(&raw_basis);
    let sigma_min = if m > d * d {
        0.0
    } else {
        vecs.clone().svd(false, false).singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let scale = raw_basis.iter().map(|b| b.norm()).fold(0.0_f64, f64::max).max(1.0);
    if sigma_min <= tol * scale {
        return Err(Error::DependentBasis { sigma_min });
    }

    let orth_basis = linalg::orthonormalize_complex(&raw_basis, tol);
    debug_assert_eq!(orth_basis.len(), m);

    for (index, b) in raw_basis.iter().enumerate() {
        let adj = b.adjoint();
        let mut r = adj.clone();
        for q in &orth_basis {
            r -= q * linalg::complex_inner(q, &adj);
        }
        let residual = r.norm();
        if residual > tol * b.norm().max(1.0) {
            return Err(Error::NotAdjointClosed { index, residual });
        }
    }

    let mut candidates = Vec::with_capacity(2 * m);
    for b in &raw_basis {
        let adj = b.adjoint();
        candidates.push((b + &adj).scale(0.5));
        candidates.push((b - &adj) * Complex64::new(0.0, -0.5));
    }
    let hermitian_basis = linalg::orthonormalize_real(&candidates, tol);
    if hermitian_basis.len() != m {
        return Err(Error::NotAdjointClosed { index: 0, residual: (hermitian_basis.len() as f64 - m as f64).abs() });
    }
    let herm_in_raw = express_in_basis(&vecs, &hermitian_basis);
    let orth_in_raw = express_in_basis(&vecs, &orth_basis);

    Ok(OperatorSystemSpec {
        name: name.to_string(),
        ambient_dim: d,
        basis: raw_basis,
        hermitian_basis,
        herm_in_raw,
        orth_basis,
        orth_in_raw,
        tolerances,
    })
}

fn vectorize(mats: &[CMatrix]) -> CMatrix {
    let d2 = mats[0].len();
    let mut v = CMatrix::zeros(d2, mats.len());
    for (k, b) in mats.iter().enumerate() {
        for (i, z) in b.iter().enumerate() {
            v[(i, k)] = *z;
        }
    }
    v
}

/// Rows: coefficients of each target matrix in the columns of `vecs`.
fn express_in_basis(vecs: &CMatrix, targets: &[CMatrix]) -> CMatrix {
    let svd = vecs.clone().svd(true, true);
    let mut out = CMatrix::zeros(targets.len(), vecs.ncols());
    for (j, t) in targets.iter().enumerate() {
        let rhs = DVector::from_iterator(t.len(), t.iter().copied());
        let c = svd.solve(&rhs, 1e-14).expect("svd solve");
        for k in 0..vecs.ncols() {
            out[(j, k)] = c[k];
        }
    }
    out
}

impl OperatorSystemSpec {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    /// Complex dimension of `S` (= real dimension of `S^sa`).
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }
    pub fn hermitian_basis(&self) -> &[CMatrix] {
        &self.hermitian_basis
    }
    pub fn tolerances(&self) -> &ToleranceConfig {
        &self.tolerances
    }
    pub fn with_tolerances(mut self, tolerances: ToleranceConfig) -> Self {
        self.tolerances = tolerances;
        self
    }
    pub fn level_cap(&self) -> usize {
        self.tolerances.level_cap
    }

    /// Coefficients (over the raw basis) of `hermitian_basis[j]`.
    pub fn hermitian_in_raw(&self, j: usize) -> Vec<Complex64> {
        self.herm_in_raw.row(j).iter().copied().collect()
    }

    /// True when every basis element is diagonal, i.e. `S` sits inside the
    /// diagonal algebra `D_d`.
    pub fn is_diagonal(&self) -> bool {
        self.basis.iter().all(|b| {
            (0..self.ambient_dim).all(|i| (0..self.ambient_dim).all(|j| i == j || b[(i, j)].norm() == 0.0))
        })
    }

    /// Real frame of `M_n(S)^sa`.
    pub fn frame(&self, level: usize) -> LevelFrame {
        LevelFrame::new(self, level)
    }

    /// Selfadjoint real dimension of `M_n(S)`.
    pub fn sa_dim(&self, level: usize) -> usize {
        level * level * self.dim()
    }

    /// Level-1 element from scalar coefficients over the raw basis.
    pub fn element(&self, coeffs: &[Complex64]) -> Result<LevelElement> {
        let c = coeffs.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect();
        self.element_at(1, c)
    }

    pub fn element_at(&self, level: usize, coeffs: Vec<CMatrix>) -> Result<LevelElement> {
        LevelElement::new(self, level, coeffs)
    }

    pub fn zero(&self, level: usize) -> LevelElement {
        LevelElement::new(self, level, vec![CMatrix::zeros(level, level); self.dim()]).expect("zero element")
    }

    /// Express a matrix known to lie in `M_n(S)` as an element, without
    /// checking the projection residual.
    pub fn element_from_matrix(&self, m: &CMatrix, level: usize) -> Result<LevelElement> {
        Ok(project_to_system(self, m, level)?.0)
    }
}

/// Orthonormal real basis `U_a ⊗ h_j` of `M_n(S)^sa` realized in `M_{nd}`.
#[derive(Debug, Clone)]
pub struct LevelFrame {
    level: usize,
    ambient: usize,
    mats: Vec<CMatrix>,
    /// Coefficient matrices over the raw basis for each frame element.
    coeffs: Vec<Vec<CMatrix>>,
}

impl LevelFrame {
    fn new(spec: &OperatorSystemSpec, level: usize) -> Self {
        let units = linalg::herm_basis(level);
        let m = spec.dim();
        let mut mats = Vec::with_capacity(units.len() * m);
        let mut coeffs = Vec::with_capacity(units.len() * m);
        for (j, h) in spec.hermitian_basis.iter().enumerate() {
            for u in &units {
                mats.push(linalg::kron(u, h));
                let c: Vec<CMatrix> = (0..m).map(|k| u * spec.herm_in_raw[(j, k)]).collect();
                coeffs.push(c);
            }
        }
        Self { level, ambient: level * spec.ambient_dim, mats, coeffs }
    }

    pub fn level(&self) -> usize {
        self.level
    }
    pub fn dim(&self) -> usize {
        self.mats.len()
    }
    /// Size of the realization (`nd`).
    pub fn ambient(&self) -> usize {
        self.ambient
    }
    pub fn matrices(&self) -> &[CMatrix] {
        &self.mats
    }
    pub fn matrix(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    pub fn realize(&self, coords: &RVector) -> CMatrix {
        let mut out = CMatrix::zeros(self.ambient, self.ambient);
        for (c, m) in coords.iter().zip(&self.mats) {
            if *c != 0.0 {
                out += m.scale(*c);
            }
        }
        out
    }

    /// Orthogonal coordinates of a Hermitian matrix (projection onto `M_n(S)^sa`).
    pub fn coords(&self, m: &CMatrix) -> RVector {
        RVector::from_iterator(self.mats.len(), self.mats.iter().map(|g| linalg::real_inner(g, m)))
    }

    pub fn element(&self, spec: &OperatorSystemSpec, coords: &RVector) -> LevelElement {
        let mut c = vec![CMatrix::zeros(self.level, self.level); spec.dim()];
        for (i, &x) in coords.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (k, ck) in c.iter_mut().enumerate() {
                *ck += self.coeffs[i][k].scale(x);
            }
        }
        LevelElement { level: self.level, coeffs: c, realization: self.realize(coords) }
    }
}

/// An element of `M_n(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelElement {
    level: usize,
    coeffs: Vec<CMatrix>,
    realization: CMatrix,
}

impl LevelElement {
    pub fn new(spec: &OperatorSystemSpec, level: usize, coeffs: Vec<CMatrix>) -> Result<Self> {
        if coeffs.len() != spec.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient matrices for a basis of size {}",
                coeffs.len(),
                spec.dim()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| c.nrows() != level || c.ncols() != level) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient matrix {}x{} at level {level}",
                c.nrows(),
                c.ncols()
            )));
        }
        let realization = realize_coeffs(spec, &coeffs, level);
        Ok(Self { level, coeffs, realization })
    }

    pub fn level(&self) -> usize {
        self.level
    }
    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }
    pub fn realization(&self) -> &CMatrix {
        &self.realization
    }

    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        linalg::is_hermitian(&self.realization, tol)
    }

    pub fn selfadjoint_deviation(&self) -> f64 {
        (&self.realization - self.realization.adjoint()).camax()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.level, other.level, "level mismatch");
        Self {
            level: self.level,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            realization: &self.realization + &other.realization,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_complex(linalg::re(s))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            realization: &self.realization * s,
        }
    }

    /// `1_k ⊗ x`, realized as `diag(x, …, x)`.
    pub fn amplify(&self, k: usize) -> Self {
        let id = linalg::identity(k);
        Self {
            level: self.level * k,
            coeffs: self.coeffs.iter().map(|c| linalg::kron(&id, c)).collect(),
            realization: linalg::kron(&id, &self.realization),
        }
    }

    /// `x ⊕ y` at level `n_x + n_y`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        Self {
            level: self.level + other.level,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| linalg::direct_sum(&[a.clone(), b.clone()]))
                .collect(),
            realization: linalg::direct_sum(&[self.realization.clone(), other.realization.clone()]),
        }
    }

    /// `V* x V` for a scalar `n×m` matrix `V` (acting as `V ⊗ 1_d`).
    pub fn compress(&self, spec: &OperatorSystemSpec, v: &CMatrix) -> Self {
        let coeffs: Vec<CMatrix> = self.coeffs.iter().map(|c| v.adjoint() * c * v).collect();
        let level = v.ncols();
        let realization = realize_coeffs(spec, &coeffs, level);
        Self { level, coeffs, realization }
    }

    /// The `(i, j)` entry of `x` as a level-1 element of `S`.
    pub fn entry(&self, spec: &OperatorSystemSpec, i: usize, j: usize) -> Self {
        let c: Vec<CMatrix> = self.coeffs.iter().map(|c| CMatrix::from_element(1, 1, c[(i, j)])).collect();
        let realization = realize_coeffs(spec, &c, 1);
        Self { level: 1, coeffs: c, realization }
    }

    pub fn adjoint(&self, spec: &OperatorSystemSpec) -> Self {
        let m = self.realization.adjoint();
        project_to_system(spec, &m, self.level).expect("adjoint of element").0
    }
}

fn realize_coeffs(spec: &OperatorSystemSpec, coeffs: &[CMatrix], level: usize) -> CMatrix {
    let d = spec.ambient_dim();
    let mut out = CMatrix::zeros(level * d, level * d);
    for (c, b) in coeffs.iter().zip(spec.basis()) {
        for i in 0..level {
            for j in 0..level {
                let s = c[(i, j)];
                if s == linalg::ZERO {
                    continue;
                }
                let mut blk = out.view_mut((i * d, j * d), (d, d));
                blk += b * s;
            }
        }
    }
    out
}

/// `Σ_k coeffs[k] ⊗ B_k`.
pub fn realize(spec: &OperatorSystemSpec, x: &LevelElement) -> Result<CMatrix> {
    if x.coeffs.len() != spec.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficient matrices for a basis of size {}",
            x.coeffs.len(),
            spec.dim()
        )));
    }
    Ok(realize_coeffs(spec, &x.coeffs, x.level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_eig: f64,
}

/// Membership in the induced cone `M_n(S)^+ = M_n(S) ∩ PSD`.
pub fn is_positive(spec: &OperatorSystemSpec, x: &LevelElement) -> Result<PositivityReport> {
    let tol = spec.tolerances().eig_tol;
    let deviation = x.selfadjoint_deviation();
    if deviation > tol * x.realization.camax().max(1.0) {
        return Err(Error::NotSelfadjoint { deviation });
    }
    let min_eig = linalg::min_eig(&x.realization);
    Ok(PositivityReport { positive: min_eig >= -tol, min_eig })
}

/// Induced operator norm (largest singular value of the realization).
pub fn op_norm(x: &LevelElement) -> f64 {
    linalg::spectral_norm(&x.realization)
}

/// Nearest element of `M_n(S)` in Frobenius norm, with the residual norm.
pub fn project_to_system(spec: &OperatorSystemSpec, m: &CMatrix, level: usize) -> Result<(LevelElement, f64)> {
    let d = spec.ambient_dim();
    if m.nrows() != level * d || m.ncols() != level * d {
        return Err(Error::ShapeMismatch(format!(
            "matrix {}x{} at level {level} of a system in M_{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dim = spec.dim();
    let mut coeffs = vec![CMatrix::zeros(level, level); dim];
    for a in 0..level {
        for b in 0..level {
            let blk = m.view((a * d, b * d), (d, d)).into_owned();
            for (i, q) in spec.orth_basis.iter().enumerate() {
                let c = linalg::complex_inner(q, &blk);
                if c == linalg::ZERO {
                    continue;
                }
                for (k, ck) in coeffs.iter_mut().enumerate() {
                    ck[(a, b)] += c * spec.orth_in_raw[(i, k)];
                }
            }
        }
    }
    let x = LevelElement::new(spec, level, coeffs)?;
    let residual = (m - &x.realization).norm();
    Ok((x, residual))
}

/// Hermitian matrix of real coordinates `(U_a ⊗ h_j)`, for callers
/// holding frame coordinates of several levels.
pub fn frame_matrix(frame: &LevelFrame) -> RMatrix {
    let n = frame.dim();
    let mut out = RMatrix::zeros(frame.ambient() * frame.ambient() , n);
    for (j, g) in frame.matrices().iter().enumerate() {
        let v = linalg::hvec(g);
        out.set_column(j, &v);
    }
    out
}
