//! Positive decompositions, generation constants, positive generation and
//! order units.

use crate::conic::{ConicSolver, ConvexBodyExpr, Lmi, SdpProblem, SdpStatus, SubspaceData};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use crate::polytope::Polyhedron;
use crate::rng;
use crate::system::{LevelElement, LevelFrame, OperatorSystemSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// The smallest face of the PSD cone containing `M_n(S)^+`, together with
/// the real span of `M_n(S)^+`.
#[derive(Debug, Clone)]
pub struct ConeFace {
    pub level: usize,
    /// Orthonormal columns spanning the common range of all cone elements.
    pub range: CMatrix,
    /// Orthonormal frame coordinates (columns) of `span M_n(S)^+`.
    pub span: RMatrix,
    /// Realizations of the span basis.
    pub span_mats: Vec<CMatrix>,
    /// `V* Y V` for every span basis element `Y`.
    pub compressed: Vec<CMatrix>,
    /// A cone element that is positive definite on `range`.
    pub interior: CMatrix,
    pub interior_min_eig: f64,
    /// PSD matrices orthogonal to the cone, one per reduction step.
    pub certificates: Vec<CMatrix>,
}

impl ConeFace {
    pub fn dim(&self) -> usize {
        self.span.ncols()
    }
    pub fn is_trivial(&self) -> bool {
        self.dim() == 0 || self.range.ncols() == 0
    }

    fn compress(&self, m: &CMatrix) -> CMatrix {
        linalg::hermitian_part(&(self.range.adjoint() * m * &self.range))
    }
}

/// Facial reduction of `M_n(S)^+`.
pub fn cone_face(spec: &OperatorSystemSpec, level: usize, solver: &ConicSolver) -> Result<ConeFace> {
    let frame = spec.frame(level);
    let nd = frame.ambient();
    let tol = spec.tolerances().dedup_tol;
    let mut span = RMatrix::identity(frame.dim(), frame.dim());
    let mut range = linalg::identity(nd);
    let mut certificates = Vec::new();
    loop {
        let k = span.ncols();
        let r = range.ncols();
        let span_mats: Vec<CMatrix> = (0..k).map(|j| frame.realize(&span.column(j).into_owned())).collect();
        if k == 0 || r == 0 {
            return Ok(ConeFace {
                level,
                range: CMatrix::zeros(nd, 0),
                span: RMatrix::zeros(frame.dim(), 0),
                span_mats: Vec::new(),
                compressed: Vec::new(),
                interior: CMatrix::zeros(nd, nd),
                interior_min_eig: 0.0,
                certificates,
            });
        }
        let compressed: Vec<CMatrix> =
            span_mats.iter().map(|y| linalg::hermitian_part(&(range.adjoint() * y * &range))).collect();

        let mut p = SdpProblem::new();
        let w = p.add_vars(k);
        let lam = p.add_var();
        let mut lo = Lmi::new(r);
        let mut hi = Lmi::new(r);
        hi.add_constant(&linalg::identity(r));
        for (v, c) in w.iter().zip(&compressed) {
            lo.add_term(*v, c.clone());
            hi.add_term(*v, -c.clone());
        }
        lo.add_term(lam, -linalg::identity(r));
        p.add_lmi(lo);
        p.add_lmi(hi);
        p.minimize(lam, -1.0);
        let sol = solver.solve(&p);
        if !sol.is_optimal() && sol.status != SdpStatus::MaxIterations {
            return Err(Error::Solver(format!("facial reduction step returned {:?}", sol.status)));
        }
        let lam_star = sol.y[lam];
        if lam_star > tol {
            let mut interior = CMatrix::zeros(nd, nd);
            for (v, y) in w.iter().zip(&span_mats) {
                interior += y.scale(sol.y[*v]);
            }
            let interior_min_eig = linalg::min_eig(&linalg::hermitian_part(&(range.adjoint() * &interior * &range)));
            return Ok(ConeFace { level, range, span, span_mats, compressed, interior, interior_min_eig, certificates });
        }

        let z = &sol.duals[0];
        let (vals, vecs) = linalg::eigh(z);
        let top = vals.iter().fold(0.0_f64, |a, &b| a.max(b));
        let keep: Vec<usize> = (0..r).filter(|&i| vals[i] <= 1e-6 * top.max(1e-300)).collect();
        if keep.len() == r {
            return Err(Error::Solver("facial reduction made no progress".into()));
        }
        certificates.push(linalg::hermitian_part(&(&range * z * range.adjoint())));
        let kernel = if keep.is_empty() {
            CMatrix::zeros(r, 0)
        } else {
            CMatrix::from_columns(&keep.iter().map(|&i| vecs.column(i).into_owned()).collect::<Vec<_>>())
        };
        let new_range = &range * kernel;
        let proj_out = linalg::identity(nd) - &new_range * new_range.adjoint();
        let mut l = RMatrix::zeros(2 * nd * nd, k);
        for (j, y) in span_mats.iter().enumerate() {
            let m = &proj_out * y;
            for (i, z) in m.iter().enumerate() {
                l[(2 * i, j)] = z.re;
                l[(2 * i + 1, j)] = z.im;
            }
        }
        let keep_span = linalg::nullspace(&l, 1e-6);
        span = &span * keep_span;
        range = new_range;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveGenerationReport {
    pub level: usize,
    pub pass: bool,
    /// Rank of the accumulated cone witnesses.
    pub rank: usize,
    /// `dim_ℝ M_n(S)^sa`.
    pub dim: usize,
    /// Dimension of the cone span from facial reduction.
    pub face_dim: usize,
    pub witnesses: usize,
    /// Whether a nonzero selfadjoint functional vanishes on every witness
    /// (left null space of the witness matrix).
    pub separating_functional_exists: bool,
    /// Unit frame coordinates of a selfadjoint element orthogonal to the cone.
    pub vanishing_functional: Option<Vec<f64>>,
    /// Smallest eigenvalue, on the face range, of the average witness.
    pub average_witness_min_eig: f64,
    #[serde(skip)]
    pub witness_coords: Vec<Vec<f64>>,
}

/// Decide `span M_n(S)^+ = M_n(S)^sa` by accumulating maximizers of random
/// linear objectives over the cone cap; facial reduction supplies both a
/// well-posed parametrization and an independent rank.
pub fn positive_generation_check(
    spec: &OperatorSystemSpec,
    level: usize,
    solver: &ConicSolver,
) -> Result<PositiveGenerationReport> {
    let face = cone_face(spec, level, solver)?;
    positive_generation_from_face(spec, &face, solver)
}

pub fn positive_generation_from_face(
    spec: &OperatorSystemSpec,
    face: &ConeFace,
    solver: &ConicSolver,
) -> Result<PositiveGenerationReport> {
    let level = face.level;
    let frame = spec.frame(level);
    let dim = frame.dim();
    let tol = spec.tolerances().dedup_tol;
    let seed = spec.tolerances().seed;
    let mut witnesses: Vec<RVector> = Vec::new();
    let mut rank = 0;
    if !face.is_trivial() {
        let k = face.dim();
        let r = face.range.ncols();
        let max_draws = 4 * k + 20;
        let mut stale = 0;
        for i in 0..max_draws {
            let mut g = rng::stream(seed, "decomp", &format!("witness/{level}"), i as u64);
            let c = rng::unit_sphere(&mut g, dim);
            let cw = face.span.transpose() * &c;
            let mut p = SdpProblem::new();
            let w = p.add_vars(k);
            let mut pos = Lmi::new(r);
            let mut cap = Lmi::new(r);
            cap.add_constant(&linalg::identity(r));
            for (v, m) in w.iter().zip(&face.compressed) {
                pos.add_term(*v, m.clone());
                cap.add_term(*v, -m.clone());
            }
            p.add_lmi(pos);
            p.add_lmi(cap);
            for (v, ci) in w.iter().zip(cw.iter()) {
                p.minimize(*v, -ci);
            }
            let sol = solver.solve(&p);
            let wv = RVector::from_iterator(k, w.iter().map(|&v| sol.y[v]));
            let coords = &face.span * wv;
            witnesses.push(coords);
            let new_rank = witness_rank(&witnesses, tol);
            if new_rank > rank {
                rank = new_rank;
                stale = 0;
            } else {
                stale += 1;
            }
            if (rank == k && witnesses.len() >= 2 * k + 4) || (rank >= k && stale >= 5) {
                break;
            }
        }
    }
    let wm = witness_matrix(&witnesses, dim);
    let separating_functional_exists = wm.ncols() == 0 || linalg::rank(&wm, tol) < dim;
    let pass = rank == dim;
    let vanishing_functional = if face.dim() < dim {
        let comp = linalg::nullspace(&face.span.transpose(), 1e-9);
        (comp.ncols() > 0).then(|| comp.column(0).iter().copied().collect())
    } else {
        None
    };
    let average_witness_min_eig = if witnesses.is_empty() {
        0.0
    } else {
        let avg = witnesses.iter().fold(RVector::zeros(dim), |a, b| a + b).unscale(witnesses.len() as f64);
        linalg::min_eig(&face.compress(&frame.realize(&avg)))
    };
    Ok(PositiveGenerationReport {
        level,
        pass,
        rank,
        dim,
        face_dim: face.dim(),
        witnesses: witnesses.len(),
        separating_functional_exists,
        vanishing_functional,
        average_witness_min_eig,
        witness_coords: witnesses.iter().map(|w| w.iter().copied().collect()).collect(),
    })
}

fn witness_matrix(w: &[RVector], dim: usize) -> RMatrix {
    if w.is_empty() {
        return RMatrix::zeros(dim, 0);
    }
    RMatrix::from_columns(w)
}

fn witness_rank(w: &[RVector], tol: f64) -> usize {
    if w.is_empty() {
        return 0;
    }
    linalg::rank(&RMatrix::from_columns(w), tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub y: LevelElement,
    pub z: LevelElement,
    /// `‖y‖ + ‖z‖`.
    pub value: f64,
    /// `min max(‖y‖, ‖z‖)` over all decompositions, when requested.
    pub max_value: Option<f64>,
    /// `‖y − z − x‖` (Frobenius).
    pub residual: f64,
    pub min_eig_y: f64,
    pub min_eig_z: f64,
    pub status: SdpStatus,
}

/// Decomposition engine for one level; reuses the facial reduction across
/// calls.
#[derive(Debug, Clone)]
pub struct Decomposer {
    spec: OperatorSystemSpec,
    solver: ConicSolver,
    frame: LevelFrame,
    face: Arc<ConeFace>,
    pub with_max_objective: bool,
}

impl Decomposer {
    pub fn new(spec: &OperatorSystemSpec, level: usize, solver: &ConicSolver) -> Result<Self> {
        let face = cone_face(spec, level, solver)?;
        Ok(Self::with_face(spec, Arc::new(face), solver))
    }

    pub fn with_face(spec: &OperatorSystemSpec, face: Arc<ConeFace>, solver: &ConicSolver) -> Self {
        Self {
            spec: spec.clone(),
            solver: solver.clone(),
            frame: spec.frame(face.level),
            face,
            with_max_objective: false,
        }
    }

    pub fn face(&self) -> &ConeFace {
        &self.face
    }
    pub fn frame(&self) -> &LevelFrame {
        &self.frame
    }

    /// Minimize `‖y‖ + ‖z‖` over `y, z ∈ M_n(S)^+` with `y − z = x`.
    pub fn decompose(&self, x: &LevelElement) -> Result<Decomposition> {
        if x.level() != self.face.level {
            return Err(Error::ShapeMismatch(format!("element at level {} for a level-{} decomposer", x.level(), self.face.level)));
        }
        let tol = self.spec.tolerances();
        let dev = x.selfadjoint_deviation();
        let xm = x.realization();
        if dev > tol.eig_tol * xm.camax().max(1.0) {
            return Err(Error::NotSelfadjoint { deviation: dev });
        }
        let c = self.frame.coords(xm);
        let inside = &self.face.span * (self.face.span.transpose() * &c);
        let outside = (&c - &inside).norm();
        let xnorm = linalg::spectral_norm(xm);
        if outside > tol.dedup_tol * c.norm().max(1.0) {
            return Err(Error::Infeasible(format!(
                "component {outside:.3e} outside the span of the positive cone"
            )));
        }
        let k = self.face.dim();
        if k == 0 || xnorm == 0.0 {
            let zero = self.spec.zero(x.level());
            return Ok(Decomposition {
                y: zero.clone(),
                z: zero,
                value: 0.0,
                max_value: Some(0.0),
                residual: xm.norm(),
                min_eig_y: 0.0,
                min_eig_z: 0.0,
                status: SdpStatus::Optimal,
            });
        }
        let xc = self.face.compress(xm);
        let (w, status) = self.solve_split(&xc, false)?;
        let mut yc = &self.face.span * w;
        // nudge along the interior element if the solver left y or z slightly outside
        let y_m = self.frame.realize(&yc);
        let worst = linalg::min_eig(&y_m).min(linalg::min_eig(&(&y_m - xm)));
        if worst < 0.0 && self.face.interior_min_eig > 0.0 {
            let shift = self.frame.coords(&self.face.interior).scale(-worst / self.face.interior_min_eig);
            yc += shift;
        }
        let y = self.frame.element(&self.spec, &yc);
        let z = self.frame.element(&self.spec, &(&yc - &c));
        let value = linalg::spectral_norm(y.realization()) + linalg::spectral_norm(z.realization());
        if value > 1e3 * xnorm {
            return Err(Error::Infeasible(format!("decomposition value exceeds the cap {:.3e}", 1e3 * xnorm)));
        }
        let max_value = if self.with_max_objective {
            let (wm, _) = self.solve_split(&xc, true)?;
            let ym = self.frame.realize(&(&self.face.span * wm));
            Some(linalg::spectral_norm(&ym).max(linalg::spectral_norm(&(&ym - xm))))
        } else {
            None
        };
        let residual = (y.realization() - z.realization() - xm).norm();
        Ok(Decomposition {
            min_eig_y: linalg::min_eig(y.realization()),
            min_eig_z: linalg::min_eig(z.realization()),
            y,
            z,
            value,
            max_value,
            residual,
            status,
        })
    }

    fn solve_split(&self, xc: &CMatrix, max_objective: bool) -> Result<(RVector, SdpStatus)> {
        let k = self.face.dim();
        let r = self.face.range.ncols();
        let id = linalg::identity(r);
        let mut p = SdpProblem::new();
        let w = p.add_vars(k);
        let a = p.add_var();
        let b = if max_objective { a } else { p.add_var() };
        let mut ly = Lmi::new(r);
        let mut lz = Lmi::new(r);
        lz.add_constant(&(-xc.clone()));
        let mut la = Lmi::new(r);
        la.add_term(a, id.clone());
        let mut lb = Lmi::new(r);
        lb.add_term(b, id);
        lb.add_constant(xc);
        for (v, m) in w.iter().zip(&self.face.compressed) {
            ly.add_term(*v, m.clone());
            lz.add_term(*v, m.clone());
            la.add_term(*v, -m.clone());
            lb.add_term(*v, -m.clone());
        }
        p.add_lmi(ly);
        p.add_lmi(lz);
        p.add_lmi(la);
        p.add_lmi(lb);
        p.minimize(a, 1.0);
        if !max_objective {
            p.minimize(b, 1.0);
        }
        let sol = self.solver.solve(&p);
        match sol.status {
            SdpStatus::Infeasible => Err(Error::Infeasible("decomposition program infeasible".into())),
            SdpStatus::Unbounded | SdpStatus::NumericalFailure if sol.violation > self.spec.tolerances().feas_tol => {
                Err(Error::Solver(format!("decomposition returned {:?}", sol.status)))
            }
            status => Ok((RVector::from_iterator(k, w.iter().map(|&v| sol.y[v])), status)),
        }
    }

    /// Reference route: outer bisection on the total `t`, inner ternary
    /// search over the split `s`, feasibility through the conic engine.
    pub fn decompose_bisection(&self, x: &LevelElement, tol: f64) -> Result<f64> {
        let xm = x.realization();
        let xnorm = linalg::spectral_norm(xm);
        if xnorm == 0.0 {
            return Ok(0.0);
        }
        let nd = self.frame.ambient();
        let mut basis = RMatrix::zeros(nd * nd, self.face.dim());
        for (j, y) in self.face.span_mats.iter().enumerate() {
            basis.set_column(j, &linalg::hvec(y));
        }
        let space = Arc::new(SubspaceData::new("cone span", basis));
        let xv = linalg::hvec(xm);
        let feasible = |t: f64| -> Result<bool> {
            let gap = |s: f64| -> Result<f64> {
                let by = ConvexBodyExpr::Intersection(vec![
                    ConvexBodyExpr::SystemSa(space.clone()),
                    ConvexBodyExpr::PsdCone { n: nd },
                    ConvexBodyExpr::NormBall { n: nd, radius: s * t },
                ]);
                let bz = ConvexBodyExpr::Intersection(vec![
                    ConvexBodyExpr::PsdCone { n: nd },
                    ConvexBodyExpr::NormBall { n: nd, radius: (1.0 - s) * t },
                ])
                .translate(xv.clone());
                Ok(self.solver.check_feasible(&[by, bz])?.residual)
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..40 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                let (g1, g2) = (gap(m1)?, gap(m2)?);
                if g1.min(g2) <= self.solver.feas_tol {
                    return Ok(true);
                }
                if g1 <= g2 {
                    hi = m2;
                } else {
                    lo = m1;
                }
                if hi - lo < 1e-6 {
                    break;
                }
            }
            Ok(gap(0.5 * (lo + hi))? <= self.solver.feas_tol)
        };
        let cap = 1e3 * xnorm;
        let mut hi = 2.0 * xnorm;
        while !feasible(hi)? {
            hi *= 2.0;
            if hi > cap {
                return Err(Error::Infeasible(format!("no decomposition with total below {cap:.3e}")));
            }
        }
        let mut lo = xnorm * (1.0 - 1e-9);
        while hi - lo > tol * xnorm {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// One-shot decomposition.
pub fn decompose(spec: &OperatorSystemSpec, x: &LevelElement, solver: &ConicSolver) -> Result<Decomposition> {
    Decomposer::new(spec, x.level(), solver)?.decompose(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Sampled,
    ExactDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub level: usize,
    /// `+∞` when the level is not positively generated.
    #[serde(with = "crate::serde_f64::extended")]
    pub alpha: f64,
    /// Frame coordinates of the direction attaining `alpha`.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    pub exact: bool,
    pub mode: AlphaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub mode: AlphaMode,
    pub rows: Vec<GenerationRow>,
}

/// Deterministic directions: frame elements and normalized pairwise sums and
/// differences among the first few of them.
pub fn direction_battery(frame: &LevelFrame) -> Vec<RVector> {
    let f = frame.dim();
    let mut out = Vec::new();
    for i in 0..f {
        let mut v = RVector::zeros(f);
        v[i] = 1.0;
        out.push(v);
    }
    let m = f.min(6);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..m {
        for j in (i + 1)..m {
            for sign in [1.0, -1.0] {
                let mut v = RVector::zeros(f);
                v[i] = s;
                v[j] = sign * s;
                out.push(v);
            }
        }
    }
    out
}

/// Lower bound for `α_n` (sampled) or its exact value (diagonal systems).
pub fn alpha_estimate(
    spec: &OperatorSystemSpec,
    level: usize,
    samples: usize,
    mode: AlphaMode,
    solver: &ConicSolver,
) -> Result<GenerationRow> {
    let cap = spec.level_cap();
    if level == 0 || level > cap {
        return Err(Error::LevelOutOfRange { level, cap });
    }
    if mode == AlphaMode::ExactDiagonal {
        let alpha = exact_alpha(spec, level)?;
        return Ok(GenerationRow { level, alpha: alpha.0, witness: alpha.1, samples: 0, exact: true, mode });
    }
    let dec = Decomposer::new(spec, level, solver)?;
    let frame = dec.frame().clone();
    if dec.face().dim() < frame.dim() {
        let comp = linalg::nullspace(&dec.face().span.transpose(), 1e-9);
        let witness = comp.column(0).iter().copied().collect();
        return Ok(GenerationRow { level, alpha: f64::INFINITY, witness: Some(witness), samples: 0, exact: true, mode });
    }
    let seed = spec.tolerances().seed;
    let mut dirs = direction_battery(&frame);
    let battery = dirs.len();
    for i in 0..samples {
        let mut g = rng::stream(seed, "decomp", &format!("alpha/{level}"), i as u64);
        dirs.push(rng::unit_sphere(&mut g, frame.dim()));
    }
    let values: Vec<Result<f64>> = dirs
        .par_iter()
        .map(|d| {
            let x = frame.element(spec, d);
            let nrm = linalg::spectral_norm(x.realization());
            if nrm == 0.0 {
                return Ok(0.0);
            }
            Ok(dec.decompose(&x)?.value / nrm)
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(GenerationRow {
        level,
        alpha: best.0.max(1.0),
        witness: Some(dirs[best.1].iter().copied().collect()),
        samples: battery + samples,
        exact: false,
        mode,
    })
}

/// Estimate `α̂_n` for every level up to the cap.
pub fn generation_report(
    spec: &OperatorSystemSpec,
    samples: usize,
    mode: AlphaMode,
    solver: &ConicSolver,
) -> Result<GenerationReport> {
    let rows = (1..=spec.level_cap())
        .map(|n| alpha_estimate(spec, n, samples, mode, solver))
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationReport { mode, rows })
}

/// Real diagonal vectors (columns) of the Hermitian basis of a diagonal system.
pub fn diagonal_basis(spec: &OperatorSystemSpec) -> Result<RMatrix> {
    if !spec.is_diagonal() {
        return Err(Error::ExactUnavailable(format!("{} is not a diagonal system", spec.name())));
    }
    let d = spec.ambient_dim();
    let hb = spec.hermitian_basis();
    Ok(RMatrix::from_fn(d, hb.len(), |i, j| hb[j][(i, i)].re))
}

/// Coordinate classes of a diagonal system: returns the class sign pattern
/// when `S` is spanned by vectors with disjoint supports (then `S ≅ D_m` if
/// every class is single-signed).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalClasses {
    pub classes: usize,
    pub single_signed: bool,
}

pub fn diagonal_classes(b: &RMatrix) -> Option<DiagonalClasses> {
    let m = b.ncols();
    let mut reps: Vec<(RVector, bool, bool)> = Vec::new();
    for i in 0..b.nrows() {
        let r = b.row(i).transpose();
        let nr = r.norm();
        if nr < 1e-12 {
            continue;
        }
        let u = r.unscale(nr);
        let mut found = false;
        for (rep, pos, neg) in reps.iter_mut() {
            let c = rep.dot(&u);
            if (c.abs() - 1.0).abs() < 1e-9 {
                if c > 0.0 {
                    *pos = true;
                } else {
                    *neg = true;
                }
                found = true;
                break;
            }
        }
        if !found {
            reps.push((u, true, false));
        }
    }
    if reps.len() != m {
        return None;
    }
    Some(DiagonalClasses { classes: m, single_signed: reps.iter().all(|(_, p, n)| !(*p && *n)) })
}

/// Exact `α_n` for diagonal systems: vertex enumeration at level 1, closed
/// forms at higher levels for systems completely order isomorphic to `D_m`.
pub fn exact_alpha(spec: &OperatorSystemSpec, level: usize) -> Result<(f64, Option<Vec<f64>>)> {
    let b = diagonal_basis(spec)?;
    if level == 1 {
        return exact_alpha_level1(&b);
    }
    match diagonal_classes(&b) {
        Some(c) if c.single_signed => Ok((2.0, None)),
        Some(_) => Ok((f64::INFINITY, None)),
        None => Err(Error::ExactUnavailable(format!(
            "level {level} of {} has non-polyhedral cones",
            spec.name()
        ))),
    }
}

/// `max{v(x) : x ∈ S^sa, ‖x‖_∞ ≤ 1}` over the vertices of the unit ball, each
/// `v(x)` an exact LP. Returns the maximizing direction in Hermitian-basis
/// coordinates.
pub fn exact_alpha_level1(b: &RMatrix) -> Result<(f64, Option<Vec<f64>>)> {
    let (d, m) = b.shape();
    let mut a = RMatrix::zeros(2 * d, m);
    a.view_mut((0, 0), (d, m)).copy_from(b);
    a.view_mut((d, 0), (d, m)).copy_from(&(-b));
    let ball = Polyhedron::new(a, RVector::from_element(2 * d, 1.0));
    let mut best = (f64::NEG_INFINITY, None);
    for c in ball.vertices(1e-10) {
        let x = b * &c;
        let v = diagonal_decomposition_value(b, &x);
        if v > best.0 {
            best = (v, Some(c.iter().copied().collect()));
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::ExactUnavailable("unit ball has no vertices".into()));
    }
    Ok(best)
}

/// `min ‖y‖_∞ + ‖z‖_∞` over `y, z ∈ S ∩ ℝ^d_+` with `y − z = x` (LP by
/// enumeration); `+∞` when infeasible.
pub fn diagonal_decomposition_value(b: &RMatrix, x: &RVector) -> f64 {
    let (d, m) = b.shape();
    let n = m + 2;
    let mut a = RMatrix::zeros(4 * d, n);
    let mut rhs = RVector::zeros(4 * d);
    for i in 0..d {
        for j in 0..m {
            a[(i, j)] = -b[(i, j)];
            a[(d + i, j)] = -b[(i, j)];
            a[(2 * d + i, j)] = b[(i, j)];
            a[(3 * d + i, j)] = b[(i, j)];
        }
        rhs[d + i] = -x[i];
        a[(2 * d + i, m)] = -1.0;
        a[(3 * d + i, m + 1)] = -1.0;
        rhs[3 * d + i] = x[i];
    }
    let mut c = RVector::zeros(n);
    c[m] = 1.0;
    c[m + 1] = 1.0;
    Polyhedron::new(a, rhs).minimize(&c, 1e-10).map_or(f64::INFINITY, |(v, _)| v)
}

#[derive(Debug, Clone)]
pub struct OrderUnit {
    pub e: LevelElement,
    pub positive_basis: Vec<LevelElement>,
    /// Columns: Hermitian-basis coordinates of the positive basis.
    pub coords: RMatrix,
    pub min_eig: f64,
    /// Recipe constants `λ_h` for the Hermitian basis elements.
    pub basis_lambdas: Vec<f64>,
    pub verified: bool,
}

impl OrderUnit {
    /// Coefficients of a selfadjoint element of `S` (as an `d×d` matrix) in
    /// the positive basis.
    pub fn coefficients(&self, spec: &OperatorSystemSpec, m: &CMatrix) -> RVector {
        let c = spec.frame(1).coords(m);
        self.coords.clone().lu().solve(&c).unwrap_or_else(|| RVector::zeros(c.len()))
    }

    /// `max{1, |α_1|, …, |α_m|}`.
    pub fn lambda(&self, spec: &OperatorSystemSpec, m: &CMatrix) -> f64 {
        self.coefficients(spec, m).iter().fold(1.0_f64, |a, &b| a.max(b.abs()))
    }
}

/// Extract a positive basis of `S^sa` from cone witnesses (extreme rays
/// first) and return `e = Σ p_i`.
pub fn order_unit(spec: &OperatorSystemSpec, solver: &ConicSolver) -> Result<OrderUnit> {
    let report = positive_generation_check(spec, 1, solver)?;
    if !report.pass {
        return Err(Error::NotPositivelyGenerated { level: 1, rank: report.rank, dim: report.dim });
    }
    let frame = spec.frame(1);
    let tol = spec.tolerances();
    let mut cands: Vec<(usize, RVector)> = report
        .witness_coords
        .iter()
        .map(|w| {
            let v = RVector::from_column_slice(w);
            let m = frame.realize(&v);
            let nrm = linalg::spectral_norm(&m);
            let top = linalg::max_eig(&m).max(1e-300);
            let rank = linalg::eigvalsh(&m).iter().filter(|&&l| l > 1e-6 * top).count();
            (rank, v.unscale(nrm.max(1e-300)))
        })
        .collect();
    cands.sort_by_key(|c| c.0);
    let dim = report.dim;
    let mut chosen: Vec<RVector> = Vec::new();
    let mut ortho: Vec<RVector> = Vec::new();
    let mut idx = 0;
    while chosen.len() < dim && idx < cands.len() {
        // among the candidates of the current rank, take the one with the largest residual
        let rank = cands[idx].0;
        let end = cands[idx..].iter().position(|c| c.0 != rank).map_or(cands.len(), |p| idx + p);
        loop {
            let mut best: Option<(f64, usize)> = None;
            for (j, (_, v)) in cands[idx..end].iter().enumerate() {
                let mut r = v.clone();
                for q in &ortho {
                    r -= q.scale(q.dot(&r));
                }
                let nr = r.norm();
                if nr > tol.dedup_tol * 1e2 && best.is_none_or(|b| nr > b.0 + 1e-9) {
                    best = Some((nr, idx + j));
                }
            }
            let Some((_, j)) = best else { break };
            let v = cands[j].1.clone();
            let mut r = v.clone();
            for q in &ortho {
                r -= q.scale(q.dot(&r));
            }
            ortho.push(r.unscale(r.norm()));
            chosen.push(v);
            if chosen.len() == dim {
                break;
            }
        }
        idx = end;
    }
    if chosen.len() < dim {
        return Err(Error::NotPositivelyGenerated { level: 1, rank: chosen.len(), dim });
    }
    let coords = RMatrix::from_columns(&chosen);
    let sum = chosen.iter().fold(RVector::zeros(dim), |a, b| a + b);
    let e = frame.element(spec, &sum);
    let positive_basis: Vec<LevelElement> = chosen.iter().map(|c| frame.element(spec, c)).collect();
    let min_eig = linalg::min_eig(e.realization());
    let mut unit = OrderUnit { e, positive_basis, coords, min_eig, basis_lambdas: Vec::new(), verified: false };
    let mut verified = true;
    for h in spec.hermitian_basis() {
        let lam = unit.lambda(spec, h);
        let em = unit.e.realization();
        let plus = linalg::min_eig(&(em.scale(lam) + h));
        let minus = linalg::min_eig(&(em.scale(lam) - h));
        verified &= plus.min(minus) >= -tol.eig_tol;
        unit.basis_lambdas.push(lam);
    }
    unit.verified = verified;
    Ok(unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub lambda: f64,
    pub lambda_d: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// `min-eig(λ (1_n ⊗ e) + X)`.
    pub min_eig_plus: f64,
    /// `min-eig(λ (1_n ⊗ e) − X)`.
    pub min_eig_minus: f64,
}

impl Domination {
    pub fn holds(&self, eig_tol: f64) -> bool {
        self.min_eig_plus >= -eig_tol && self.min_eig_minus >= -eig_tol
    }
}

/// `λ_X = λ_d + λ_Re + λ_Im` for a selfadjoint `X ∈ M_n(S)`, with the
/// domination `λ_X (1_n ⊗ e) ± X ⪰ 0` checked by eigenvalues.
pub fn dominate_lambda(spec: &OperatorSystemSpec, x: &LevelElement, unit: &OrderUnit) -> Result<Domination> {
    let dev = x.selfadjoint_deviation();
    if dev > spec.tolerances().eig_tol * x.realization().camax().max(1.0) {
        return Err(Error::NotSelfadjoint { deviation: dev });
    }
    let n = x.level();
    let mut lambda_d: f64 = 0.0;
    let mut lambda_re = 0.0;
    let mut lambda_im = 0.0;
    for i in 0..n {
        let xii = x.entry(spec, i, i);
        let m = linalg::hermitian_part(xii.realization());
        lambda_d = lambda_d.max(unit.lambda(spec, &m));
        for j in (i + 1)..n {
            let xij = x.entry(spec, i, j);
            let a = xij.realization();
            let re_part = linalg::hermitian_part(a);
            let im_part = (a - a.adjoint()) * num_complex::Complex64::new(0.0, -0.5);
            // λ of Re⁺ + Re⁻ is the max of the absolute coefficients
            lambda_re += unit.lambda(spec, &re_part);
            lambda_im += unit.lambda(spec, &im_part);
        }
    }
    let lambda = lambda_d + lambda_re + lambda_im;
    let en = unit.e.amplify(n);
    let base = en.realization().scale(lambda);
    let xm = x.realization();
    Ok(Domination {
        lambda,
        lambda_d,
        lambda_re,
        lambda_im,
        min_eig_plus: linalg::min_eig(&(&base + xm)),
        min_eig_minus: linalg::min_eig(&(&base - xm)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, unit};
    use crate::system::{build_system, ToleranceConfig};
    use approx::assert_relative_eq;

    fn full2() -> OperatorSystemSpec {
        let b = vec![unit(2, 0, 0), unit(2, 0, 1), unit(2, 1, 0), unit(2, 1, 1)];
        build_system("M2", b, ToleranceConfig::default()).unwrap()
    }

    fn off() -> OperatorSystemSpec {
        build_system("off", vec![unit(2, 0, 1), unit(2, 1, 0)], ToleranceConfig::default()).unwrap()
    }

    fn diag2() -> OperatorSystemSpec {
        build_system("D2", vec![unit(2, 0, 0), unit(2, 1, 1)], ToleranceConfig::default()).unwrap()
    }

    #[test]
    fn face_of_full_algebra_is_everything() {
        let f = cone_face(&full2(), 1, &ConicSolver::default()).unwrap();
        assert_eq!(f.dim(), 4);
        assert_eq!(f.range.ncols(), 2);
        assert!(f.interior_min_eig > 0.0);
    }

    #[test]
    fn face_of_off_diagonal_is_trivial() {
        let f = cone_face(&off(), 1, &ConicSolver::default()).unwrap();
        assert!(f.is_trivial());
        assert_eq!(f.certificates.len(), 1);
    }

    #[test]
    fn partial_face() {
        // span{E11, E12, E21}: cone is ℝ₊E11
        let s = build_system("corner", vec![unit(2, 0, 0), unit(2, 0, 1), unit(2, 1, 0)], ToleranceConfig::default())
            .unwrap();
        let f = cone_face(&s, 1, &ConicSolver::default()).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.range.ncols(), 1);
        let rep = positive_generation_from_face(&s, &f, &ConicSolver::default()).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.rank, 1);
    }

    #[test]
    fn decompose_identity_and_flip() {
        let s = full2();
        let solver = ConicSolver::default();
        let id = s.element_from_matrix(&linalg::identity(2), 1).unwrap();
        let d = decompose(&s, &id, &solver).unwrap();
        assert_relative_eq!(d.value, 1.0, epsilon = 1e-7);
        let x = s.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
        let d = decompose(&s, &x, &solver).unwrap();
        assert_relative_eq!(d.value, 2.0, epsilon = 1e-7);
        assert!(d.min_eig_y >= -1e-9 && d.min_eig_z >= -1e-9);
    }

    #[test]
    fn decompose_off_diagonal_is_infeasible() {
        let s = off();
        let x = s.element(&[linalg::re(1.0), linalg::re(1.0)]).unwrap();
        assert!(matches!(decompose(&s, &x, &ConicSolver::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bisection_route_agrees() {
        let s = full2();
        let solver = ConicSolver::default();
        let dec = Decomposer::new(&s, 1, &solver).unwrap();
        let x = s.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
        let v = dec.decompose_bisection(&x, 1e-4).unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn max_objective_is_recorded() {
        let s = full2();
        let mut dec = Decomposer::new(&s, 1, &ConicSolver::default()).unwrap();
        dec.with_max_objective = true;
        let x = s.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
        let d = dec.decompose(&x).unwrap();
        assert_relative_eq!(d.max_value.unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn exact_alpha_examples() {
        let d2 = diag2();
        assert_relative_eq!(exact_alpha(&d2, 1).unwrap().0, 2.0, epsilon = 1e-12);
        let line = build_system("A01", vec![diag_real(&[0.0, 0.5, 1.0])], ToleranceConfig::default()).unwrap();
        assert_relative_eq!(exact_alpha(&line, 1).unwrap().0, 1.0, epsilon = 1e-12);
        assert_relative_eq!(exact_alpha(&line, 2).unwrap().0, 2.0, epsilon = 1e-12);
        let sym = build_system("A-11", vec![diag_real(&[-1.0, 0.0, 1.0])], ToleranceConfig::default()).unwrap();
        assert!(exact_alpha(&sym, 1).unwrap().0.is_infinite());
    }

    #[test]
    fn order_unit_of_diagonal_is_identity() {
        let u = order_unit(&diag2(), &ConicSolver::default()).unwrap();
        assert_relative_eq!((u.e.realization() - linalg::identity(2)).norm(), 0.0, epsilon = 1e-6);
        assert!(u.verified);
    }

    #[test]
    fn dominate_lambda_diagonal_example() {
        let s = diag2();
        let u = order_unit(&s, &ConicSolver::default()).unwrap();
        let x = s.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
        let d = dominate_lambda(&s, &x, &u).unwrap();
        assert_relative_eq!(d.lambda, 1.0, epsilon = 1e-6);
        assert!(d.holds(1e-9));
    }
}
