//! Constructions on systems: ccp maps, kernels and quotients, coproducts
//! and pushouts.

use crate::conic::{ConicSolver, Lmi, SdpProblem, SdpStatus};
use crate::decomp;
use crate::duality::{self, Functional, QuasistateBody};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RVector};
use crate::rng;
use crate::system::{self, LevelElement, OperatorSystemSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A linear map between systems, given by the images of the source basis.
#[derive(Debug, Clone)]
pub struct CcpMapSpec {
    pub source: OperatorSystemSpec,
    pub target: OperatorSystemSpec,
    values: Vec<LevelElement>,
}

impl CcpMapSpec {
    pub fn new(source: &OperatorSystemSpec, target: &OperatorSystemSpec, values: Vec<LevelElement>) -> Result<Self> {
        if values.len() != source.dim() {
            return Err(Error::ShapeMismatch(format!("{} images for a basis of size {}", values.len(), source.dim())));
        }
        if let Some(v) = values.iter().find(|v| v.level() != 1 || v.coeffs().len() != target.dim()) {
            return Err(Error::ShapeMismatch(format!("image at level {} is not a level-1 target element", v.level())));
        }
        Ok(Self { source: source.clone(), target: target.clone(), values })
    }

    /// Restriction of a linear map on matrices; every image must lie in the
    /// target.
    pub fn from_matrix_map(
        source: &OperatorSystemSpec,
        target: &OperatorSystemSpec,
        map: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(source.dim());
        for b in source.basis() {
            let m = map(b);
            if m.shape() != (target.ambient_dim(), target.ambient_dim()) {
                return Err(Error::ShapeMismatch(format!("image of shape {:?}", m.shape())));
            }
            let (e, residual) = image_element(target, &m)?;
            if residual > target.tolerances().dedup_tol * m.norm().max(1.0) {
                return Err(Error::ShapeMismatch(format!("image leaves the target by {residual:.3e}")));
            }
            values.push(e);
        }
        Self::new(source, target, values)
    }

    pub fn identity(spec: &OperatorSystemSpec) -> Self {
        Self::from_matrix_map(spec, spec, |b| b.clone()).expect("identity map")
    }

    pub fn values(&self) -> &[LevelElement] {
        &self.values
    }

    /// `c[l][k]`: coefficient of target basis element `l` in `φ(B_k)`.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.target.dim(), self.source.dim(), |l, k| self.values[k].coeffs()[l][(0, 0)])
    }

    /// `φ_n(x)` for `x ∈ M_n(source)`.
    pub fn apply(&self, x: &LevelElement) -> Result<LevelElement> {
        let n = x.level();
        let c = self.matrix();
        let coeffs = (0..self.target.dim())
            .map(|l| {
                let mut a = CMatrix::zeros(n, n);
                for (k, ak) in x.coeffs().iter().enumerate() {
                    a += ak * c[(l, k)];
                }
                a
            })
            .collect();
        LevelElement::new(&self.target, n, coeffs)
    }

    /// The map followed by the identity embedding of the target, as a
    /// functional into `M_{d_target}`.
    pub fn as_functional(&self) -> Functional {
        let values = self.values.iter().map(|v| v.realization().clone()).collect();
        Functional::new(&self.source, self.target.ambient_dim(), values).expect("consistent shapes")
    }

    /// `g ∘ φ` for a functional `g` on the target.
    pub fn pull_back(&self, g: &Functional) -> Functional {
        let values = self.values.iter().map(|v| g.apply(&scalars(v))).collect();
        Functional::new(&self.source, g.level(), values).expect("consistent shapes")
    }

    pub fn rank(&self) -> usize {
        linalg::rank(&linalg::realify(&self.matrix()), 1e-9)
    }

    /// Basis of `ker φ` as matrices in the source ambient space.
    pub fn kernel(&self) -> Vec<CMatrix> {
        let c = self.matrix();
        let gram = c.adjoint() * &c;
        let (vals, vecs) = linalg::eigh(&linalg::hermitian_part(&gram));
        let top = vals.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1.0);
        let mut out = Vec::new();
        for i in 0..vals.len() {
            if vals[i] <= 1e-14 * top {
                let mut m = CMatrix::zeros(self.source.ambient_dim(), self.source.ambient_dim());
                for (k, b) in self.source.basis().iter().enumerate() {
                    m += b * vecs[(k, i)];
                }
                out.push(m);
            }
        }
        out
    }
}

fn scalars(v: &LevelElement) -> Vec<Complex64> {
    v.coeffs().iter().map(|c| c[(0, 0)]).collect()
}

fn image_element(target: &OperatorSystemSpec, m: &CMatrix) -> Result<(LevelElement, f64)> {
    // split into Hermitian parts, which project exactly
    let h = linalg::hermitian_part(m);
    let k = (m - m.adjoint()) * Complex64::new(0.0, -0.5);
    let (eh, rh) = system::project_to_system(target, &h, 1)?;
    let (ek, rk) = system::project_to_system(target, &k, 1)?;
    Ok((eh.add(&ek.scale_complex(Complex64::new(0.0, 1.0))), rh.hypot(rk)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpReport {
    pub pass: bool,
    pub completely_positive: bool,
    #[serde(with = "crate::serde_f64::extended")]
    pub cp_margin: f64,
    /// `Φ(1) ⪯ 1` for some CP extension, which bounds the cb-norm by 1.
    pub extension_contractive: bool,
    /// Largest sampled `‖φ_n(x)‖ / ‖x‖` per level.
    pub sampled_norms: Vec<(usize, f64)>,
}

pub fn check_ccp_map(map: &CcpMapSpec, levels: usize, samples: usize, solver: &ConicSolver) -> Result<CcpReport> {
    let f = map.as_functional();
    let cp = duality::is_cp_functional(&map.source, &f, solver)?;
    let qs = duality::is_quasistate(&map.source, &f, solver)?;
    let seed = map.source.tolerances().seed;
    let m = map.source.dim();
    let mut sampled_norms = Vec::new();
    for n in 1..=levels {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let mut g = rng::stream(seed, "algebra", &format!("ccp/{n}"), i as u64);
            let coeffs: Vec<CMatrix> = (0..m).map(|_| rng::complex_gaussian(&mut g, n, n)).collect();
            let x = LevelElement::new(&map.source, n, coeffs)?;
            let nx = linalg::spectral_norm(x.realization());
            if nx > 1e-12 {
                worst = worst.max(linalg::spectral_norm(map.apply(&x)?.realization()) / nx);
            }
        }
        sampled_norms.push((n, worst));
    }
    let contractive = sampled_norms.iter().all(|&(_, r)| r <= 1.0 + 1e-7);
    Ok(CcpReport {
        pass: cp.accepted && qs.accepted && contractive,
        completely_positive: cp.accepted,
        cp_margin: cp.margin,
        extension_contractive: qs.accepted,
        sampled_norms,
    })
}

/// `X/J` for the kernel `J` of a registered map.
#[derive(Debug, Clone)]
pub struct QuotientSpec {
    pub map: CcpMapSpec,
    kernel: Vec<CMatrix>,
}

impl QuotientSpec {
    pub fn of(map: &CcpMapSpec) -> Self {
        Self { map: map.clone(), kernel: map.kernel() }
    }

    /// Register `J` explicitly; it must span exactly `ker φ`.
    pub fn with_kernel(map: &CcpMapSpec, kernel: Vec<CMatrix>) -> Result<Self> {
        let ker = map.kernel();
        if ker.len() != kernel.len() {
            return Err(Error::KernelMismatch(format!("kernel has dimension {}, given {}", ker.len(), kernel.len())));
        }
        for j in &kernel {
            let (e, _) = system::project_to_system(&map.source, &linalg::hermitian_part(j), 1)?;
            let (ei, _) = system::project_to_system(&map.source, &((j - j.adjoint()) * Complex64::new(0.0, -0.5)), 1)?;
            let x = e.add(&ei.scale_complex(Complex64::new(0.0, 1.0)));
            let img = map.apply(&x)?;
            if img.realization().norm() > map.source.tolerances().dedup_tol * j.norm().max(1.0) {
                return Err(Error::KernelMismatch("a given element is not annihilated by the map".into()));
            }
        }
        Ok(Self { map: map.clone(), kernel })
    }

    pub fn kernel(&self) -> &[CMatrix] {
        &self.kernel
    }

    pub fn is_selfadjoint_closed(&self) -> bool {
        let ker = &self.kernel;
        if ker.is_empty() {
            return true;
        }
        let mut cols: Vec<RVector> = ker.iter().map(|m| flatten(m)).collect();
        let r = linalg::rank(&linalg::RMatrix::from_columns(&cols), 1e-9);
        cols.extend(ker.iter().map(|m| flatten(&m.adjoint())));
        linalg::rank(&linalg::RMatrix::from_columns(&cols), 1e-9) == r
    }
}

fn flatten(m: &CMatrix) -> RVector {
    RVector::from_iterator(2 * m.len(), m.iter().flat_map(|z| [z.re, z.im]))
}

/// `[[t, M], [M*, t]] ⪰ 0` with `M = m0 + Σ y_v M_v`.
fn norm_lmi(t: usize, m0: &CMatrix, terms: &[(usize, CMatrix)]) -> Lmi {
    let (r, c) = m0.shape();
    let mut l = Lmi::new(r + c);
    l.add_term(t, linalg::identity(r + c));
    l.add_constant_at(0, r, m0);
    for (v, m) in terms {
        l.add_term_at(*v, 0, r, m);
    }
    l
}

/// `min_{j ∈ M_n(J)} ‖x − j‖`.
pub fn quotient_norm(q: &QuotientSpec, x: &LevelElement, solver: &ConicSolver) -> Result<f64> {
    let xm = x.realization();
    if q.kernel.is_empty() {
        return Ok(linalg::spectral_norm(xm));
    }
    let n = x.level();
    let mut p = SdpProblem::new();
    let t = p.add_var();
    let mut terms = Vec::new();
    for jk in &q.kernel {
        for a in 0..n {
            for b in 0..n {
                let e = linalg::unit(n, a, b);
                let m = linalg::kron(&e, jk);
                terms.push((p.add_var(), -m.clone()));
                terms.push((p.add_var(), -(m * Complex64::new(0.0, 1.0))));
            }
        }
    }
    p.add_lmi(norm_lmi(t, xm, &terms));
    p.minimize(t, 1.0);
    let sol = solver.solve(&p);
    if sol.status == SdpStatus::Infeasible {
        return Err(Error::Solver("quotient norm program infeasible".into()));
    }
    Ok(sol.y[t].max(0.0).min(linalg::spectral_norm(xm)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeDistance {
    pub cap: f64,
    #[serde(with = "crate::serde_f64::extended")]
    pub distance: f64,
    /// The same distance with the cap doubled.
    #[serde(with = "crate::serde_f64::extended")]
    pub distance_double_cap: f64,
}

/// `min{‖y − φ_n(p)‖ : p ∈ M_n(X)^+, ‖p‖ ≤ R}`.
pub fn quotient_cone_distance(map: &CcpMapSpec, y: &LevelElement, cap: f64, solver: &ConicSolver) -> Result<ConeDistance> {
    let n = y.level();
    let face = decomp::cone_face(&map.source, n, solver)?;
    let frame = map.source.frame(n);
    let ym = y.realization();
    let dist = |r: f64| -> Result<f64> {
        if face.is_trivial() {
            return Ok(linalg::spectral_norm(ym));
        }
        let k = face.dim();
        let rank = face.range.ncols();
        let mut p = SdpProblem::new();
        let t = p.add_var();
        let w = p.add_vars(k);
        let mut pos = Lmi::new(rank);
        let mut ball = Lmi::new(rank);
        ball.add_constant(&linalg::identity(rank).scale(r));
        let mut terms = Vec::new();
        for (j, &v) in w.iter().enumerate() {
            pos.add_term(v, face.compressed[j].clone());
            ball.add_term(v, -face.compressed[j].clone());
            let e = frame.element(&map.source, &face.span.column(j).into_owned());
            terms.push((v, -map.apply(&e)?.realization().clone()));
        }
        p.add_lmi(pos);
        p.add_lmi(ball);
        p.add_lmi(norm_lmi(t, ym, &terms));
        p.minimize(t, 1.0);
        let sol = solver.solve(&p);
        Ok(sol.y[t].max(0.0))
    };
    Ok(ConeDistance { cap, distance: dist(cap)?, distance_double_cap: dist(2.0 * cap)? })
}

/// Completely bounded norm of `g: E → M_k` for `E ⊆ M_d`, through CP
/// extensions of the Paulsen map on `M_{2d}`.
pub fn cb_norm(spec: &OperatorSystemSpec, g: &Functional, solver: &ConicSolver) -> Result<f64> {
    Ok(cb_norm_bounds(spec, g, solver)?.1)
}

/// Lower and upper bounds on `‖g‖_cb` from one interior-point solve.
pub fn cb_norm_bounds(spec: &OperatorSystemSpec, g: &Functional, solver: &ConicSolver) -> Result<(f64, f64)> {
    let d = spec.ambient_dim();
    let k = g.level();
    if g.values().iter().all(|v| v.norm() == 0.0) {
        return Ok((0.0, 0.0));
    }
    let (dd, kk) = (2 * d, 2 * k);
    let basis = linalg::herm_basis(dd * kk);
    let apply = |c: &CMatrix, x: &CMatrix| -> CMatrix {
        let mut out = CMatrix::zeros(kk, kk);
        for a in 0..dd {
            for b in 0..dd {
                if x[(a, b)] != Complex64::new(0.0, 0.0) {
                    out += linalg::block(c, a, b, kk) * x[(a, b)];
                }
            }
        }
        out
    };
    let mut p = SdpProblem::new();
    let t = p.add_var();
    let vars = p.add_vars(basis.len());
    let mut psd = Lmi::new(dd * kk);
    for (&v, m) in vars.iter().zip(&basis) {
        psd.add_term(v, m.clone());
    }
    p.add_lmi(psd);
    let corner = |i: usize, j: usize, m: &CMatrix, size: usize| -> CMatrix {
        let mut out = CMatrix::zeros(2 * size, 2 * size);
        out.view_mut((i * size, j * size), (size, size)).copy_from(m);
        out
    };
    let equate = |p: &mut SdpProblem, x: &CMatrix, target: &CMatrix, with_t: bool| {
        let imgs: Vec<CMatrix> = basis.iter().map(|c| apply(c, x)).collect();
        for idx in 0..kk * kk {
            for part in 0..2 {
                let pick = |z: Complex64| if part == 0 { z.re } else { z.im };
                let mut terms: Vec<(usize, f64)> = vars
                    .iter()
                    .zip(&imgs)
                    .map(|(&v, m)| (v, pick(m[idx])))
                    .filter(|(_, c)| c.abs() > 1e-15)
                    .collect();
                if with_t {
                    let c = pick(target[idx]);
                    if c != 0.0 {
                        terms.push((t, -c));
                    }
                    p.add_eq(terms, 0.0);
                } else {
                    p.add_eq(terms, pick(target[idx]));
                }
            }
        }
    };
    let id_d = linalg::identity(d);
    let id_k = linalg::identity(k);
    equate(&mut p, &corner(0, 0, &id_d, d), &corner(0, 0, &id_k, k), true);
    equate(&mut p, &corner(1, 1, &id_d, d), &corner(1, 1, &id_k, k), true);
    for (b, v) in spec.basis().iter().zip(g.values()) {
        equate(&mut p, &corner(0, 1, b, d), &corner(0, 1, v, k), false);
    }
    p.minimize(t, 1.0);
    let sol = solver.solve(&p);
    match sol.status {
        SdpStatus::Infeasible | SdpStatus::Unbounded => Err(Error::Solver(format!("cb-norm program returned {:?}", sol.status))),
        _ => {
            let upper = sol.y[t].max(0.0);
            let lower = if sol.dual_objective.is_finite() { sol.dual_objective.clamp(0.0, upper) } else { 0.0 };
            Ok((lower, upper))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientConstants {
    pub level: usize,
    #[serde(with = "crate::serde_f64::extended")]
    pub c_primal: f64,
    #[serde(with = "crate::serde_f64::extended")]
    pub c_dual: f64,
    pub samples: usize,
}

/// Lower bounds for the quotient constant of a surjective map: minimal
/// preimage norms (primal) and `‖g‖_cb / ‖g ∘ φ‖_cb` (dual).
pub fn quotient_constant_estimate(
    map: &CcpMapSpec,
    level: usize,
    samples: usize,
    solver: &ConicSolver,
) -> Result<QuotientConstants> {
    let c_primal = quotient_primal_estimate(map, level, samples, solver)?;
    let (seed, n, mt) = (map.source.tolerances().seed, level, map.target.dim());
    let dual: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, "algebra", &format!("quotient_dual/{n}"), i as u64);
            let values: Vec<CMatrix> = (0..mt).map(|_| rng::complex_gaussian(&mut g, n, n)).collect();
            let f = Functional::new(&map.target, n, values)?;
            let top = cb_norm_bounds(&map.target, &f, solver)?.0;
            let bottom = cb_norm_bounds(&map.source, &map.pull_back(&f), solver)?.1;
            Ok(if bottom > 0.0 { top / bottom } else { f64::INFINITY })
        })
        .collect();
    let c_dual = dual.into_iter().try_fold(0.0_f64, |a, b| Ok::<f64, Error>(a.max(b?)))?;
    Ok(QuotientConstants { level, c_primal, c_dual, samples })
}

/// Primal lower bound alone: the largest ratio of minimal preimage norm to
/// target norm over seeded samples.
pub fn quotient_primal_estimate(map: &CcpMapSpec, level: usize, samples: usize, solver: &ConicSolver) -> Result<f64> {
    let rank = map.rank();
    let want = 2 * map.target.dim();
    if rank < want {
        return Err(Error::NotSurjective { rank, dim: want });
    }
    let q = QuotientSpec::of(map);
    let seed = map.source.tolerances().seed;
    let c = map.matrix();
    let pinv = c.clone().pseudo_inverse(1e-12).map_err(|e| Error::Solver(e.to_string()))?;
    let n = level;
    let mt = map.target.dim();
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, "algebra", &format!("quotient_primal/{n}"), i as u64);
            let coeffs: Vec<CMatrix> = (0..mt).map(|_| rng::complex_gaussian(&mut g, n, n)).collect();
            let y = LevelElement::new(&map.target, n, coeffs)?;
            let ny = linalg::spectral_norm(y.realization());
            let pre: Vec<CMatrix> = (0..map.source.dim())
                .map(|k| {
                    let mut a = CMatrix::zeros(n, n);
                    for (l, yl) in y.coeffs().iter().enumerate() {
                        a += yl * pinv[(k, l)];
                    }
                    a
                })
                .collect();
            let x = LevelElement::new(&map.source, n, pre)?;
            Ok(quotient_norm(&q, &x, solver)? / ny)
        })
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .try_fold(0.0_f64, |a, b| Ok(a.max(b?)))
}

/// The coproduct `S ⊕ T`, evaluated through quasistate pairs.
#[derive(Debug, Clone)]
pub struct CoproductSpec {
    pub s: OperatorSystemSpec,
    /// `None` stands for the zero system.
    pub t: Option<OperatorSystemSpec>,
    pub k_max: usize,
}

impl CoproductSpec {
    pub fn new(s: &OperatorSystemSpec, t: &OperatorSystemSpec) -> Self {
        Self { s: s.clone(), t: Some(t.clone()), k_max: s.ambient_dim() + t.ambient_dim() }
    }

    pub fn with_zero_system(s: &OperatorSystemSpec) -> Self {
        Self { s: s.clone(), t: None, k_max: s.ambient_dim() }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max.max(1);
        self
    }

    /// The coproduct cone is componentwise.
    pub fn is_positive(&self, x: &LevelElement, y: Option<&LevelElement>) -> Result<bool> {
        let px = system::is_positive(&self.s, x)?.positive;
        let py = match (&self.t, y) {
            (Some(t), Some(y)) => system::is_positive(t, y)?.positive,
            _ => true,
        };
        Ok(px && py)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoproductNorm {
    #[serde(with = "crate::serde_f64::extended")]
    pub value: f64,
    /// `(k, value)` for every restart.
    pub samples: Vec<(usize, f64)>,
    /// `‖x‖ + ‖y‖`.
    pub upper: f64,
}

/// Gradient of `Re u*⟨⟨x, f⟩⟩v` in the functional coordinates of level `k`.
fn pairing_gradient(spec: &OperatorSystemSpec, x: &LevelElement, k: usize, u: &CMatrix, v: &CMatrix) -> Result<RVector> {
    let dim = spec.dim() * k * k;
    let mut g = RVector::zeros(dim);
    for i in 0..dim {
        let mut e = RVector::zeros(dim);
        e[i] = 1.0;
        let f = Functional::from_coords(spec, k, &e)?;
        g[i] = (u.adjoint() * f.pair(x) * v)[(0, 0)].re;
    }
    Ok(g)
}

/// Lower bound for `‖(x, y)‖` in `M_n(S ⊕ T)` by alternating maximization
/// over quasistate pairs at levels `k ≤ k_max`.
pub fn coproduct_norm_estimate(
    cp: &CoproductSpec,
    x: &LevelElement,
    y: Option<&LevelElement>,
    restarts: usize,
    solver: &ConicSolver,
) -> Result<CoproductNorm> {
    let n = x.level();
    let upper = linalg::spectral_norm(x.realization()) + y.map_or(0.0, |y| linalg::spectral_norm(y.realization()));
    let seed = cp.s.tolerances().seed;
    let jobs: Vec<(usize, usize)> = (1..=cp.k_max).flat_map(|k| (0..restarts.max(1)).map(move |r| (k, r))).collect();
    let runs: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let mut g = rng::stream(seed, "algebra", &format!("coproduct/{k}"), r as u64);
            let ks = QuasistateBody::new(&cp.s, k);
            let kt = cp.t.as_ref().map(|t| QuasistateBody::new(t, k));
            let (_, mut f) = ks.support(&cp.s, &rng::unit_sphere(&mut g, ks.dim()), solver)?;
            let mut h = match (&kt, &cp.t) {
                (Some(b), Some(t)) => Some(b.support(t, &rng::unit_sphere(&mut g, b.dim()), solver)?.1),
                _ => None,
            };
            let eval = |f: &Functional, h: &Option<Functional>| -> CMatrix {
                let mut m = f.pair(x);
                if let (Some(h), Some(y)) = (h, y) {
                    m += h.pair(y);
                }
                m
            };
            let mut best = linalg::spectral_norm(&eval(&f, &h));
            for _ in 0..30 {
                let m = eval(&f, &h);
                let (_, u, v) = linalg::top_singular(&m);
                let u = CMatrix::from_column_slice(n * k, 1, u.as_slice());
                let v = CMatrix::from_column_slice(n * k, 1, v.as_slice());
                f = ks.support(&cp.s, &pairing_gradient(&cp.s, x, k, &u, &v)?, solver)?.1;
                if let (Some(b), Some(t), Some(y)) = (&kt, &cp.t, y) {
                    h = Some(b.support(t, &pairing_gradient(t, y, k, &u, &v)?, solver)?.1);
                }
                let val = linalg::spectral_norm(&eval(&f, &h));
                let done = val <= best + 1e-10;
                best = best.max(val);
                if done {
                    break;
                }
            }
            Ok((k, best.min(upper)))
        })
        .collect();
    let samples = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let value = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(CoproductNorm { value, samples, upper })
}

/// `Ĉ` of the coproduct quasistate body, which is the product of the two
/// factor bodies; the factors are evaluated on matched samples.
pub fn coproduct_order_interval_constant(
    cp: &CoproductSpec,
    level: usize,
    samples: usize,
    solver: &ConicSolver,
) -> Result<(f64, f64, f64)> {
    let cs = duality::order_interval_constant(&cp.s, level, samples, solver)?.beta;
    let ct = match &cp.t {
        Some(t) => duality::order_interval_constant(t, level, samples, solver)?.beta,
        None => 0.0,
    };
    Ok((cs.max(ct), cs, ct))
}

/// `S ⊕_R T` for maps `φ: R → S`, `ψ: R → T`.
#[derive(Debug, Clone)]
pub struct PushoutSpec {
    pub s: OperatorSystemSpec,
    pub t: OperatorSystemSpec,
    /// `None` stands for the zero system.
    pub maps: Option<(CcpMapSpec, CcpMapSpec)>,
}

impl PushoutSpec {
    pub fn new(phi: &CcpMapSpec, psi: &CcpMapSpec) -> Result<Self> {
        if phi.source != psi.source {
            return Err(Error::ShapeMismatch("the two maps must share their source".into()));
        }
        Ok(Self { s: phi.target.clone(), t: psi.target.clone(), maps: Some((phi.clone(), psi.clone())) })
    }

    pub fn over_zero(s: &OperatorSystemSpec, t: &OperatorSystemSpec) -> Self {
        Self { s: s.clone(), t: t.clone(), maps: None }
    }
}

/// Whether a quasistate pair `(f, g)` lies in the fibered product:
/// `f ∘ φ = g ∘ ψ` on `R`.
pub fn pushout_membership(po: &PushoutSpec, f: &Functional, g: &Functional, solver: &ConicSolver) -> Result<bool> {
    for (spec, h) in [(&po.s, f), (&po.t, g)] {
        let r = duality::is_quasistate(spec, h, solver)?;
        if !r.accepted {
            return Err(Error::NotQuasistate { violation: r.margin });
        }
    }
    let Some((phi, psi)) = &po.maps else {
        return Ok(true);
    };
    if f.level() != g.level() {
        return Ok(false);
    }
    let a = phi.pull_back(f);
    let b = psi.pull_back(g);
    let tol = po.s.tolerances().feas_tol;
    Ok(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).camax() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, unit};
    use crate::system::{build_system, ToleranceConfig};
    use approx::assert_relative_eq;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn full2() -> OperatorSystemSpec {
        build_system("M2", vec![unit(2, 0, 0), unit(2, 0, 1), unit(2, 1, 0), unit(2, 1, 1)], tol()).unwrap()
    }

    fn quotient_example() -> CcpMapSpec {
        let x = build_system("D2", vec![unit(2, 0, 0), unit(2, 1, 1)], tol()).unwrap();
        let y = build_system("C", vec![linalg::identity(1)], tol()).unwrap();
        CcpMapSpec::from_matrix_map(&x, &y, |m| CMatrix::from_element(1, 1, (m[(0, 0)] + m[(1, 1)]) * 0.5)).unwrap()
    }

    #[test]
    fn identity_and_doubling() {
        let s = full2();
        let solver = ConicSolver::default();
        assert!(check_ccp_map(&CcpMapSpec::identity(&s), 2, 10, &solver).unwrap().pass);
        let double = CcpMapSpec::from_matrix_map(&s, &s, |b| b.scale(2.0)).unwrap();
        assert!(!check_ccp_map(&double, 2, 10, &solver).unwrap().pass);
    }

    #[test]
    fn quotient_norm_examples() {
        let solver = ConicSolver::default();
        let map = quotient_example();
        let q = QuotientSpec::of(&map);
        assert_eq!(q.kernel().len(), 1);
        assert!(q.is_selfadjoint_closed());
        let e11 = map.source.element_from_matrix(&unit(2, 0, 0), 1).unwrap();
        assert_relative_eq!(quotient_norm(&q, &e11, &solver).unwrap(), 0.5, epsilon = 1e-7);
        let j = map.source.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
        assert!(quotient_norm(&q, &j, &solver).unwrap() < 1e-7);
    }

    #[test]
    fn quotient_constants_of_example() {
        let solver = ConicSolver::default();
        let c = quotient_constant_estimate(&quotient_example(), 1, 10, &solver).unwrap();
        assert_relative_eq!(c.c_primal, 1.0, epsilon = 1e-6);
        assert_relative_eq!(c.c_dual, 1.0, epsilon = 1e-6);
        let s = full2();
        let half = CcpMapSpec::from_matrix_map(&s, &s, |b| b.scale(0.5)).unwrap();
        let c = quotient_constant_estimate(&half, 1, 5, &solver).unwrap();
        assert_relative_eq!(c.c_primal, 2.0, epsilon = 1e-6);
        assert_relative_eq!(c.c_dual, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn cb_norm_of_transpose() {
        let s = full2();
        let tr = Functional::from_map(&s, 2, |b| b.transpose()).unwrap();
        assert_relative_eq!(cb_norm(&s, &tr, &ConicSolver::default()).unwrap(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn coproduct_of_intervals() {
        let s = build_system("A01", vec![diag_real(&[0.0, 1.0])], tol()).unwrap();
        let cp = CoproductSpec::new(&s, &s).with_k_max(1);
        let solver = ConicSolver::default();
        let a = s.element_from_matrix(&diag_real(&[0.0, 1.0]), 1).unwrap();
        let r = coproduct_norm_estimate(&cp, &a, Some(&a), 3, &solver).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-6);
        let r = coproduct_norm_estimate(&cp, &a, Some(&a.scale(-1.0)), 3, &solver).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-6);
        assert!(r.samples.iter().all(|s| s.1 <= 1.0 + 1e-9));
    }

    #[test]
    fn pushout_over_identity() {
        let s = full2();
        let solver = ConicSolver::default();
        let id = CcpMapSpec::identity(&s);
        let po = PushoutSpec::new(&id, &id).unwrap();
        let f = Functional::from_map(&s, 1, |b| CMatrix::from_element(1, 1, linalg::trace(b) * 0.5)).unwrap();
        let g = Functional::from_map(&s, 1, |b| CMatrix::from_element(1, 1, b[(0, 0)])).unwrap();
        assert!(pushout_membership(&po, &f, &f, &solver).unwrap());
        assert!(!pushout_membership(&po, &f, &g, &solver).unwrap());
        assert!(pushout_membership(&PushoutSpec::over_zero(&s, &s), &f, &g, &solver).unwrap());
    }
}
