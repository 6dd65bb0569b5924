//! The dual side: matrix-valued functionals, complete positivity through
//! Choi extensions, quasistate bodies, normality and dualizability verdicts.

use crate::conic::{ConicSolver, ConvexBodyExpr, LiftedRep, Lmi, SdpProblem, SdpStatus};
use crate::decomp::{self, AlphaMode};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use crate::polytope::Polyhedron;
use crate::rng;
use crate::system::{LevelElement, OperatorSystemSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A linear map `f: S → M_n`, stored by its values on the raw basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    level: usize,
    values: Vec<CMatrix>,
}

impl Functional {
    pub fn new(spec: &OperatorSystemSpec, level: usize, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| v.shape() != (level, level)) {
            return Err(Error::ShapeMismatch(format!("functional value of shape {:?} at level {level}", v.shape())));
        }
        Ok(Self { level, values })
    }

    pub fn zero(spec: &OperatorSystemSpec, level: usize) -> Self {
        Self { level, values: vec![CMatrix::zeros(level, level); spec.dim()] }
    }

    /// Restriction of a linear map on `M_d`.
    pub fn from_map(spec: &OperatorSystemSpec, level: usize, map: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        Self::new(spec, level, spec.basis().iter().map(map).collect())
    }

    /// Selfadjoint functional from real coordinates `hvec(f(h_j))`, `j` outer.
    pub fn from_coords(spec: &OperatorSystemSpec, level: usize, coords: &RVector) -> Result<Self> {
        let m = spec.dim();
        let nn = level * level;
        if coords.len() != m * nn {
            return Err(Error::DimensionMismatch { expected: m * nn, found: coords.len() });
        }
        let on_herm: Vec<CMatrix> =
            (0..m).map(|j| linalg::hmat(&coords.rows(j * nn, nn).into_owned(), level)).collect();
        let r = CMatrix::from_fn(m, m, |j, k| spec.hermitian_in_raw(j)[k]);
        let rinv = r.try_inverse().ok_or_else(|| Error::Solver("singular Hermitian change of basis".into()))?;
        let values = (0..m)
            .map(|k| {
                let mut v = CMatrix::zeros(level, level);
                for (j, h) in on_herm.iter().enumerate() {
                    v += h * rinv[(k, j)];
                }
                v
            })
            .collect();
        Ok(Self { level, values })
    }

    /// The scalar functional `x ↦ tr(w x)` for a Hermitian `w`.
    pub fn trace_against(spec: &OperatorSystemSpec, w: &CMatrix) -> Self {
        let values = spec.basis().iter().map(|b| CMatrix::from_element(1, 1, linalg::trace(&(w * b)))).collect();
        Self { level: 1, values }
    }

    pub fn level(&self) -> usize {
        self.level
    }
    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    /// `f(Σ_k c_k B_k)`.
    pub fn apply(&self, coeffs: &[Complex64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.level, self.level);
        for (c, v) in coeffs.iter().zip(&self.values) {
            out += v * *c;
        }
        out
    }

    /// Values on the Hermitian basis.
    pub fn on_hermitian_basis(&self, spec: &OperatorSystemSpec) -> Vec<CMatrix> {
        (0..spec.dim()).map(|j| self.apply(&spec.hermitian_in_raw(j))).collect()
    }

    pub fn selfadjoint_deviation(&self, spec: &OperatorSystemSpec) -> f64 {
        self.on_hermitian_basis(spec).iter().map(|v| (v - v.adjoint()).camax()).fold(0.0, f64::max)
    }

    pub fn coords(&self, spec: &OperatorSystemSpec) -> RVector {
        let parts: Vec<f64> = self
            .on_hermitian_basis(spec)
            .iter()
            .flat_map(|v| linalg::hvec(&linalg::hermitian_part(v)).iter().copied().collect::<Vec<_>>())
            .collect();
        RVector::from_vec(parts)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { level: self.level, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { level: self.level, values: self.values.iter().map(|a| a.scale(s)).collect() }
    }

    /// Matrix pairing `⟨⟨a, f⟩⟩ = [f(a_ij)]`, of size `pn × pn` for `a ∈ M_p(S)`.
    pub fn pair(&self, a: &LevelElement) -> CMatrix {
        let mut out = CMatrix::zeros(a.level() * self.level, a.level() * self.level);
        for (ak, fk) in a.coeffs().iter().zip(&self.values) {
            out += linalg::kron(ak, fk);
        }
        out
    }
}

/// Hermitian coordinates of a Choi matrix on `M_d ⊗ M_n` and the action of
/// each coordinate direction on the system.
#[derive(Debug, Clone)]
struct ChoiBasis {
    size: usize,
    mats: Vec<CMatrix>,
    /// `hvec(Φ_v(h_j))` concatenated over `j`.
    images: Vec<RVector>,
    /// `Φ_v(1_d)`.
    units: Vec<CMatrix>,
}

impl ChoiBasis {
    fn new(spec: &OperatorSystemSpec, n: usize) -> Self {
        let d = spec.ambient_dim();
        let mats = linalg::herm_basis(d * n);
        let apply = |c: &CMatrix, x: &CMatrix| -> CMatrix {
            let mut out = CMatrix::zeros(n, n);
            for a in 0..d {
                for b in 0..d {
                    if x[(a, b)] != Complex64::new(0.0, 0.0) {
                        out += linalg::block(c, a, b, n) * x[(a, b)];
                    }
                }
            }
            out
        };
        let id = linalg::identity(d);
        let images = mats
            .iter()
            .map(|c| {
                let parts: Vec<f64> = spec
                    .hermitian_basis()
                    .iter()
                    .flat_map(|h| linalg::hvec(&apply(c, h)).iter().copied().collect::<Vec<_>>())
                    .collect();
                RVector::from_vec(parts)
            })
            .collect();
        let units = mats.iter().map(|c| apply(c, &id)).collect();
        Self { size: d * n, mats, images, units }
    }

    fn dim(&self) -> usize {
        self.mats.len()
    }

    fn add_vars(&self, p: &mut SdpProblem) -> Vec<usize> {
        p.add_vars(self.dim())
    }

    fn psd(&self, vars: &[usize]) -> Lmi {
        let mut l = Lmi::new(self.size);
        for (&v, m) in vars.iter().zip(&self.mats) {
            l.add_term(v, m.clone());
        }
        l
    }

    /// `s·1_n − Φ(1)`, as an LMI without the `s` part.
    fn unit_gap(&self, vars: &[usize], n: usize) -> Lmi {
        let mut l = Lmi::new(n);
        for (&v, m) in vars.iter().zip(&self.units) {
            l.add_term(v, -m.clone());
        }
        l
    }

    fn realize(&self, y: &[f64], vars: &[usize]) -> CMatrix {
        let mut c = CMatrix::zeros(self.size, self.size);
        for (&v, m) in vars.iter().zip(&self.mats) {
            c += m.scale(y[v]);
        }
        c
    }

    /// Equalities `Σ_v coeff·image_v[r] … = rhs[r]` for a list of Choi
    /// variable groups with signs.
    fn restrict_eq(&self, p: &mut SdpProblem, groups: &[(&[usize], f64)], rhs: &RVector) {
        for r in 0..rhs.len() {
            let mut terms = Vec::new();
            for (vars, sign) in groups {
                for (&v, img) in vars.iter().zip(&self.images) {
                    if img[r].abs() > 1e-15 {
                        terms.push((v, sign * img[r]));
                    }
                }
            }
            p.add_eq(terms, rhs[r]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub accepted: bool,
    /// Optimal shift `s*`; accepted iff `s* ≤ tol`.
    pub margin: f64,
    pub status: SdpStatus,
    /// True when the solver status degraded and the answer is not reliable.
    pub inconclusive: bool,
    #[serde(skip)]
    pub choi: Option<CMatrix>,
}

fn accept_tol(spec: &OperatorSystemSpec) -> f64 {
    10.0 * spec.tolerances().feas_tol
}

fn membership(spec: &OperatorSystemSpec, f: &Functional, solver: &ConicSolver, unit_bound: bool) -> Result<CpReport> {
    let n = f.level();
    let dev = f.selfadjoint_deviation(spec);
    let scale = f.values().iter().map(|v| v.camax()).fold(1.0, f64::max);
    if dev > spec.tolerances().eig_tol * scale {
        return Ok(CpReport { accepted: false, margin: f64::INFINITY, status: SdpStatus::Infeasible, inconclusive: false, choi: None });
    }
    let cb = ChoiBasis::new(spec, n);
    let mut p = SdpProblem::new();
    let vars = cb.add_vars(&mut p);
    let s = p.add_var();
    let mut psd = cb.psd(&vars);
    psd.add_term(s, linalg::identity(cb.size));
    p.add_lmi(psd);
    if unit_bound {
        let mut gap = cb.unit_gap(&vars, n);
        gap.add_constant(&linalg::identity(n));
        gap.add_term(s, linalg::identity(n));
        p.add_lmi(gap);
    } else {
        let trace: Vec<(usize, f64)> =
            vars.iter().zip(&cb.mats).map(|(&v, m)| (v, -linalg::trace(m).re)).filter(|t| t.1 != 0.0).collect();
        p.add_nonneg(trace, 1e4 * scale * cb.size as f64);
    }
    p.add_nonneg(vec![(s, 1.0)], 1.0);
    cb.restrict_eq(&mut p, &[(&vars, 1.0)], &f.coords(spec));
    p.minimize(s, 1.0);
    let sol = solver.solve(&p);
    if sol.status == SdpStatus::Infeasible {
        return Ok(CpReport { accepted: false, margin: f64::INFINITY, status: sol.status, inconclusive: false, choi: None });
    }
    let margin = sol.y[s];
    let inconclusive = !sol.is_optimal() && sol.violation > spec.tolerances().feas_tol;
    Ok(CpReport {
        accepted: margin <= accept_tol(spec),
        margin,
        status: sol.status,
        inconclusive,
        choi: Some(cb.realize(&sol.y, &vars)),
    })
}

/// Does `f` extend to a completely positive map on `M_d`?
pub fn is_cp_functional(spec: &OperatorSystemSpec, f: &Functional, solver: &ConicSolver) -> Result<CpReport> {
    membership(spec, f, solver, false)
}

/// Does `f` extend to a completely positive map `Φ` on `M_d` with `Φ(1) ⪯ 1`?
pub fn is_quasistate(spec: &OperatorSystemSpec, f: &Functional, solver: &ConicSolver) -> Result<CpReport> {
    membership(spec, f, solver, true)
}

/// `inf{t : f/t is a quasistate}`; `+∞` when `f` has no CP extension.
pub fn quasistate_gauge(spec: &OperatorSystemSpec, f: &Functional, solver: &ConicSolver) -> Result<f64> {
    let n = f.level();
    if f.selfadjoint_deviation(spec) > spec.tolerances().eig_tol * f.values().iter().map(|v| v.camax()).fold(1.0, f64::max) {
        return Ok(f64::INFINITY);
    }
    let cb = ChoiBasis::new(spec, n);
    let mut p = SdpProblem::new();
    let vars = cb.add_vars(&mut p);
    let t = p.add_var();
    p.add_lmi(cb.psd(&vars));
    let mut gap = cb.unit_gap(&vars, n);
    gap.add_term(t, linalg::identity(n));
    p.add_lmi(gap);
    p.add_nonneg(vec![(t, -1.0)], solver.t_max);
    cb.restrict_eq(&mut p, &[(&vars, 1.0)], &f.coords(spec));
    p.minimize(t, 1.0);
    let sol = solver.solve(&p);
    match sol.status {
        SdpStatus::Infeasible => Ok(f64::INFINITY),
        _ if sol.y[t] >= solver.t_max * (1.0 - 1e-6) => Ok(f64::INFINITY),
        _ => Ok(sol.y[t].max(0.0)),
    }
}

/// The level-`n` quasistate body in the coordinates of [`Functional::coords`].
#[derive(Debug, Clone)]
pub struct QuasistateBody {
    pub level: usize,
    pub body: ConvexBodyExpr,
}

impl QuasistateBody {
    pub fn new(spec: &OperatorSystemSpec, level: usize) -> Self {
        let cb = ChoiBasis::new(spec, level);
        let dim = spec.dim() * level * level;
        let mut rep = LiftedRep::new(&format!("quasistates of {} at level {level}", spec.name()), dim, cb.dim());
        let u: Vec<usize> = (0..cb.dim()).map(|j| rep.u(j)).collect();
        rep.add_lmi(cb.psd(&u));
        let mut gap = cb.unit_gap(&u, level);
        gap.add_term(rep.t(), linalg::identity(level));
        rep.add_lmi(gap);
        for r in 0..dim {
            let mut terms: Vec<(usize, f64)> = u
                .iter()
                .zip(&cb.images)
                .filter(|(_, img)| img[r].abs() > 1e-15)
                .map(|(&v, img)| (v, img[r]))
                .collect();
            terms.push((rep.x(r), -1.0));
            rep.add_eq(terms);
        }
        Self { level, body: ConvexBodyExpr::Lifted(Arc::new(rep)) }
    }

    pub fn dim(&self) -> usize {
        self.body.dim().unwrap_or(0)
    }

    pub fn contains(&self, spec: &OperatorSystemSpec, f: &Functional, solver: &ConicSolver) -> Result<bool> {
        Ok(solver.contains(&self.body, &f.coords(spec))?.0)
    }

    /// Maximizer of `⟨c, ·⟩` as a functional.
    pub fn support(&self, spec: &OperatorSystemSpec, c: &RVector, solver: &ConicSolver) -> Result<(f64, Functional)> {
        let s = solver.support_max(&self.body, c)?;
        Ok((s.value, Functional::from_coords(spec, self.level, &s.point)?))
    }

    /// A random point: a convex combination of support maximizers of random
    /// objectives.
    pub fn sample(
        &self,
        spec: &OperatorSystemSpec,
        solver: &ConicSolver,
        rng: &mut rng::Rng,
        extremes: usize,
    ) -> Result<Functional> {
        let d = self.dim();
        let mut weights: Vec<f64> = (0..extremes).map(|_| -rng::uniform(rng).max(1e-300).ln()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut acc = RVector::zeros(d);
        for w in weights {
            let c = rng::unit_sphere(rng, d);
            acc += solver.support_max(&self.body, &c)?.point.scale(w);
        }
        Functional::from_coords(spec, self.level, &acc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub level: usize,
    /// `+∞` when growth with the cap is detected.
    #[serde(with = "crate::serde_f64::extended")]
    pub beta: f64,
    /// Coordinates of the functional attaining `beta` at the base cap.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    /// `(cap, value)` along the escalation.
    #[serde(with = "crate::serde_f64::extended_pairs")]
    pub caps: Vec<(f64, f64)>,
    pub unbounded_growth: bool,
    pub degraded: bool,
}

const CAPS: [f64; 3] = [10.0, 100.0, 1000.0];

/// Maximize `⟨c, f⟩` over `{f : f CP, g − f CP, g quasistate, tr Choi(f) ≤ cap}`
/// and return the quasistate gauge of the maximizer.
fn order_interval_gauge(
    spec: &OperatorSystemSpec,
    cb: &ChoiBasis,
    level: usize,
    c: &RVector,
    cap: f64,
    solver: &ConicSolver,
) -> Result<(f64, RVector, bool)> {
    let mut p = SdpProblem::new();
    let vf = cb.add_vars(&mut p);
    let vh = cb.add_vars(&mut p);
    let vg = cb.add_vars(&mut p);
    p.add_lmi(cb.psd(&vf));
    p.add_lmi(cb.psd(&vh));
    p.add_lmi(cb.psd(&vg));
    let mut gap = cb.unit_gap(&vg, level);
    gap.add_constant(&linalg::identity(level));
    p.add_lmi(gap);
    let trace: Vec<(usize, f64)> =
        vf.iter().zip(&cb.mats).map(|(&v, m)| (v, -linalg::trace(m).re)).filter(|t| t.1 != 0.0).collect();
    p.add_nonneg(trace, cap);
    let dim = c.len();
    cb.restrict_eq(&mut p, &[(&vg, 1.0), (&vf, -1.0), (&vh, -1.0)], &RVector::zeros(dim));
    for (&v, img) in vf.iter().zip(&cb.images) {
        p.minimize(v, -img.dot(c));
    }
    let sol = solver.solve(&p);
    let degraded = !sol.is_optimal() && sol.violation > spec.tolerances().feas_tol;
    let mut coords = RVector::zeros(dim);
    for (&v, img) in vf.iter().zip(&cb.images) {
        coords += img.scale(sol.y[v]);
    }
    let f = Functional::from_coords(spec, level, &coords)?;
    let g = quasistate_gauge(spec, &f, solver)?;
    Ok((g, coords, degraded))
}

fn interval_battery(
    spec: &OperatorSystemSpec,
    level: usize,
    samples: usize,
    label: &str,
    solver: &ConicSolver,
) -> Result<NormalityReport> {
    let cb = ChoiBasis::new(spec, level);
    let dim = spec.dim() * level * level;
    let seed = spec.tolerances().seed;
    let objectives: Vec<RVector> = (0..samples.max(1))
        .map(|i| rng::unit_sphere(&mut rng::stream(seed, "duality", &format!("{label}/{level}"), i as u64), dim))
        .collect();
    let runs: Vec<Result<(f64, RVector, bool)>> =
        objectives.par_iter().map(|c| order_interval_gauge(spec, &cb, level, c, CAPS[0], solver)).collect();
    let mut best = (f64::NEG_INFINITY, 0usize, RVector::zeros(dim));
    let mut degraded = false;
    for (i, r) in runs.into_iter().enumerate() {
        let (g, coords, deg) = r?;
        degraded |= deg;
        if g > best.0 {
            best = (g, i, coords);
        }
    }
    let mut caps = vec![(CAPS[0], best.0)];
    for &cap in &CAPS[1..] {
        let (g, _, deg) = order_interval_gauge(spec, &cb, level, &objectives[best.1], cap, solver)?;
        degraded |= deg;
        caps.push((cap, g));
    }
    let last = caps.last().map_or(0.0, |c| c.1);
    let unbounded_growth = last > 5.0 * best.0.max(1e-12) && last > 10.0;
    Ok(NormalityReport {
        level,
        beta: if unbounded_growth { f64::INFINITY } else { best.0.max(0.0) },
        witness: Some(best.2.iter().copied().collect()),
        samples: objectives.len(),
        caps,
        unbounded_growth,
        degraded,
    })
}

/// Lower bound `β̂_n` for the dual normality constant.
pub fn normality_estimate(
    spec: &OperatorSystemSpec,
    level: usize,
    samples: usize,
    solver: &ConicSolver,
) -> Result<NormalityReport> {
    check_level(spec, level)?;
    interval_battery(spec, level, samples, "normality", solver)
}

/// Lower bound `Ĉ_n` for the inclusion `(K − ℝ₊K) ∩ ℝ₊K ⊆ C·K` of the
/// quasistate body.
pub fn order_interval_constant(
    spec: &OperatorSystemSpec,
    level: usize,
    samples: usize,
    solver: &ConicSolver,
) -> Result<NormalityReport> {
    check_level(spec, level)?;
    interval_battery(spec, level, samples, "order_interval", solver)
}

fn check_level(spec: &OperatorSystemSpec, level: usize) -> Result<()> {
    let cap = spec.level_cap();
    if level == 0 || level > cap {
        return Err(Error::LevelOutOfRange { level, cap });
    }
    Ok(())
}

/// Exact `β_n` for diagonal systems: vertex enumeration at level 1, closed
/// forms for `D_m`-type systems above.
pub fn exact_beta(spec: &OperatorSystemSpec, level: usize) -> Result<f64> {
    let b = decomp::diagonal_basis(spec)?;
    if level == 1 {
        return Ok(exact_beta_level1(&b));
    }
    match decomp::diagonal_classes(&b) {
        Some(c) if c.single_signed => Ok(1.0),
        Some(_) => Ok(f64::INFINITY),
        None => Err(Error::ExactUnavailable(format!("level {level} of {} has non-polyhedral dual cones", spec.name()))),
    }
}

/// `sup{γ_K(Rμ) : μ, ν, κ ≥ 0, Σκ ≤ 1, R(μ + ν − κ) = 0}` with `R = Bᵀ` and
/// `γ_K(f) = min{Σλ : λ ≥ 0, Rλ = f}`.
pub fn exact_beta_level1(b: &RMatrix) -> f64 {
    let (d, m) = b.shape();
    let r = b.transpose();
    let tol = 1e-10;
    // recession directions that move Rμ make the supremum infinite
    let mut ra = RMatrix::zeros(2 * d + 1, 2 * d);
    for i in 0..2 * d {
        ra[(i, i)] = -1.0;
        ra[(2 * d, i)] = 1.0;
    }
    let mut rb = RVector::zeros(2 * d + 1);
    rb[2 * d] = 1.0;
    let mut req = RMatrix::zeros(m, 2 * d);
    req.view_mut((0, 0), (m, d)).copy_from(&r);
    req.view_mut((0, d), (m, d)).copy_from(&r);
    let rec = Polyhedron::new(ra, rb).with_equalities(req, RVector::zeros(m));
    for v in rec.vertices(tol) {
        let moved = &r * v.rows(0, d);
        if moved.amax() > 1e-8 {
            return f64::INFINITY;
        }
    }
    let n = 3 * d;
    let mut a = RMatrix::zeros(n + 1, n);
    for i in 0..n {
        a[(i, i)] = -1.0;
    }
    for i in 0..d {
        a[(n, 2 * d + i)] = 1.0;
    }
    let mut rhs = RVector::zeros(n + 1);
    rhs[n] = 1.0;
    let mut eq = RMatrix::zeros(m, n);
    eq.view_mut((0, 0), (m, d)).copy_from(&r);
    eq.view_mut((0, d), (m, d)).copy_from(&r);
    eq.view_mut((0, 2 * d), (m, d)).copy_from(&(-&r));
    let poly = Polyhedron::new(a, rhs).with_equalities(eq, RVector::zeros(m));
    poly.vertices(tol)
        .iter()
        .map(|v| diagonal_gauge(&r, &(&r * v.rows(0, d))))
        .fold(0.0, f64::max)
}

/// `min{Σλ : λ ≥ 0, Rλ = f}`; `+∞` when infeasible.
pub fn diagonal_gauge(r: &RMatrix, f: &RVector) -> f64 {
    let d = r.ncols();
    let a = -RMatrix::identity(d, d);
    let p = Polyhedron::new(a, RVector::zeros(d)).with_equalities(r.clone(), f.clone());
    p.minimize(&RVector::from_element(d, 1.0), 1e-10).map_or(f64::INFINITY, |(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotDualizableCertified,
    DualizableEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelConstants {
    pub level: usize,
    pub generated: bool,
    #[serde(with = "crate::serde_f64::extended_opt")]
    pub alpha: Option<f64>,
    #[serde(with = "crate::serde_f64::extended_opt")]
    pub beta: Option<f64>,
    #[serde(with = "crate::serde_f64::extended_opt")]
    pub c_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualizabilityVerdict {
    pub verdict: Verdict,
    pub levels: Vec<LevelConstants>,
    /// Level at which positive generation failed, if any.
    pub failed_level: Option<usize>,
    /// Hermitian matrix `w` orthogonal to the cone: `x ↦ tr(w x)` is a
    /// nonzero selfadjoint functional vanishing on all positives.
    pub vanishing_functional: Option<Vec<Vec<[f64; 2]>>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerdictOptions {
    pub levels: usize,
    pub samples: usize,
}

pub fn dualizability_verdict(
    spec: &OperatorSystemSpec,
    opts: VerdictOptions,
    solver: &ConicSolver,
) -> Result<DualizabilityVerdict> {
    let levels = opts.levels.min(spec.level_cap()).max(1);
    let mut table = Vec::new();
    let mut notes = Vec::new();
    for n in 1..=levels {
        let face = decomp::cone_face(spec, n, solver)?;
        let rep = decomp::positive_generation_from_face(spec, &face, solver)?;
        if !rep.pass {
            let coords = rep.vanishing_functional.clone().unwrap_or_default();
            let w = spec.frame(n).realize(&RVector::from_vec(coords));
            let wm: Vec<Vec<[f64; 2]>> =
                (0..w.nrows()).map(|i| (0..w.ncols()).map(|j| [w[(i, j)].re, w[(i, j)].im]).collect()).collect();
            table.push(LevelConstants { level: n, generated: false, alpha: Some(f64::INFINITY), beta: None, c_hat: None });
            notes.push(format!("cone span rank {} < {} at level {n}", rep.rank, rep.dim));
            return Ok(DualizabilityVerdict {
                verdict: Verdict::NotDualizableCertified,
                levels: table,
                failed_level: Some(n),
                vanishing_functional: Some(wm),
                notes,
            });
        }
        table.push(LevelConstants { level: n, generated: true, alpha: None, beta: None, c_hat: None });
    }
    let mut degraded = false;
    for row in table.iter_mut() {
        let n = row.level;
        let a = decomp::alpha_estimate(spec, n, opts.samples, AlphaMode::Sampled, solver)?;
        let b = normality_estimate(spec, n, opts.samples, solver)?;
        let c = order_interval_constant(spec, n, opts.samples, solver)?;
        degraded |= b.degraded || c.degraded || !a.alpha.is_finite() || b.unbounded_growth || c.unbounded_growth;
        row.alpha = Some(a.alpha);
        row.beta = Some(b.beta);
        row.c_hat = Some(c.beta);
    }
    let verdict = if degraded {
        notes.push("solver statuses degraded or estimates grew with the cap".into());
        Verdict::Inconclusive
    } else {
        Verdict::DualizableEvidence
    };
    Ok(DualizabilityVerdict { verdict, levels: table, failed_level: None, vanishing_functional: None, notes })
}
