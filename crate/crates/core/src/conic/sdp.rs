//! Dense primal-dual interior-point solver for small linear matrix
//! inequality problems:
//!
//! ```text
//!   minimize    cᵀy
//!   subject to  a_iᵀ y = b_i                      (linear equalities)
//!               F_b(y) = F_b⁰ + Σ_v y_v F_bᵛ ⪰ 0  (one Hermitian block per LMI)
//! ```
//!
//! Equalities are eliminated up front, variables that no LMI sees are
//! dropped (or reported unbounded), and the remaining problem is solved with
//! the HKM search direction and a Mehrotra predictor-corrector from an
//! infeasible start.

use crate::linalg::{self, CMatrix, RMatrix, RVector};
use serde::{Deserialize, Serialize};

/// One linear matrix inequality `constant + Σ y_v M_v ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Lmi {
    size: usize,
    constant: CMatrix,
    terms: Vec<(usize, CMatrix)>,
}

impl Lmi {
    pub fn new(size: usize) -> Self {
        Self { size, constant: CMatrix::zeros(size, size), terms: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.size
    }
    pub fn constant(&self) -> &CMatrix {
        &self.constant
    }
    pub fn terms(&self) -> &[(usize, CMatrix)] {
        &self.terms
    }

    pub fn add_constant(&mut self, m: &CMatrix) {
        assert_eq!(m.nrows(), self.size, "lmi constant size");
        self.constant += m;
    }

    /// Add `m` into the constant at block offset `(i, j)`; the mirrored
    /// block receives `m*` unless `i == j`.
    pub fn add_constant_at(&mut self, i: usize, j: usize, m: &CMatrix) {
        place(&mut self.constant, i, j, m);
    }

    pub fn add_term(&mut self, var: usize, m: CMatrix) {
        assert_eq!(m.nrows(), self.size, "lmi term size");
        self.terms.push((var, m));
    }

    /// Add `y_var · m` at block offset `(i, j)` (and its adjoint at `(j, i)`).
    pub fn add_term_at(&mut self, var: usize, i: usize, j: usize, m: &CMatrix) {
        let mut full = CMatrix::zeros(self.size, self.size);
        place(&mut full, i, j, m);
        self.terms.push((var, full));
    }

    pub fn evaluate(&self, y: &[f64]) -> CMatrix {
        let mut out = self.constant.clone();
        for (v, m) in &self.terms {
            if y[*v] != 0.0 {
                out += m.scale(y[*v]);
            }
        }
        out
    }
}

fn place(target: &mut CMatrix, i: usize, j: usize, m: &CMatrix) {
    {
        let mut v = target.view_mut((i, j), m.shape());
        v += m;
    }
    if i != j {
        let mut v = target.view_mut((j, i), (m.ncols(), m.nrows()));
        v += m.adjoint();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEq {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    equalities: Vec<LinearEq>,
    blocks: Vec<Lmi>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }
    pub fn equalities(&self) -> &[LinearEq] {
        &self.equalities
    }
    pub fn blocks(&self) -> &[Lmi] {
        &self.blocks
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.add_var()).collect()
    }

    /// Add `coeff · y_var` to the (minimized) objective.
    pub fn minimize(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearEq { terms, rhs });
    }

    pub fn add_lmi(&mut self, lmi: Lmi) -> usize {
        self.blocks.push(lmi);
        self.blocks.len() - 1
    }

    /// `constant + Σ coeff·y ≥ 0`.
    pub fn add_nonneg(&mut self, terms: Vec<(usize, f64)>, constant: f64) -> usize {
        let mut l = Lmi::new(1);
        l.constant[(0, 0)] = linalg::re(constant);
        for (v, c) in terms {
            l.add_term(v, CMatrix::from_element(1, 1, linalg::re(c)));
        }
        self.add_lmi(l)
    }

    /// Add `y_var · I` to every LMI added so far.
    pub fn relax_blocks(&mut self, var: usize) {
        for b in &mut self.blocks {
            let n = b.size;
            b.add_term(var, linalg::identity(n));
        }
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any constraint at `y`: equality residuals and
    /// negative parts of the smallest LMI eigenvalues.
    pub fn violation(&self, y: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for eq in &self.equalities {
            let lhs: f64 = eq.terms.iter().map(|(v, c)| c * y[*v]).sum();
            worst = worst.max((lhs - eq.rhs).abs());
        }
        for b in &self.blocks {
            worst = worst.max(-linalg::min_eig(&b.evaluate(y)));
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Value of `cᵀy` at the returned point.
    pub objective: f64,
    /// Lower bound from the matrix iterate (meaningful when optimal).
    pub dual_objective: f64,
    pub y: Vec<f64>,
    /// Dual matrices, one per block (zero for blocks removed before the solve).
    pub duals: Vec<CMatrix>,
    pub iterations: usize,
    /// True constraint violation of `y`.
    pub violation: f64,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100, step_fraction: 0.95 }
    }
}

type Blocks = Vec<CMatrix>;

/// Reduced problem in standard dual form:
/// maximize `bᵀw` s.t. `S = C − Σ w_l A_l ⪰ 0`.
struct Reduced {
    c: Blocks,
    a: Vec<Vec<Option<CMatrix>>>,
    b: RVector,
    /// `y = y0 + map · w`
    y0: RVector,
    map: RMatrix,
    active: Vec<usize>,
}

enum Reduction {
    Ready(Reduced),
    Done(SdpStatus, RVector),
}

fn reduce(p: &SdpProblem) -> Reduction {
    let nv = p.num_vars;
    let c_full = RVector::from_column_slice(&p.objective);

    let (y0, basis) = if p.equalities.is_empty() {
        (RVector::zeros(nv), RMatrix::identity(nv, nv))
    } else {
        let mut a = RMatrix::zeros(p.equalities.len(), nv);
        let mut b = RVector::zeros(p.equalities.len());
        for (i, eq) in p.equalities.iter().enumerate() {
            for (v, c) in &eq.terms {
                a[(i, *v)] += c;
            }
            b[i] = eq.rhs;
        }
        let scale = a.norm().max(1.0);
        let y0 = linalg::lstsq(&a, &b, 1e-12 * scale);
        let res = (&a * &y0 - &b).norm();
        if res > 1e-9 * (1.0 + b.norm()) {
            return Reduction::Done(SdpStatus::Infeasible, y0);
        }
        (y0, linalg::nullspace(&a, 1e-10 * scale))
    };

    // images of the remaining free directions in every block
    let sizes: Vec<usize> = p.blocks.iter().map(|b| b.size).collect();
    let rows: usize = sizes.iter().map(|s| s * s).sum();
    let mut g_full = RMatrix::zeros(rows, nv);
    let mut offset = 0;
    for blk in &p.blocks {
        let n2 = blk.size * blk.size;
        for (v, m) in &blk.terms {
            let h = linalg::hvec(m);
            let mut col = g_full.view_mut((offset, *v), (n2, 1));
            col += &h;
        }
        offset += n2;
    }
    let g = &g_full * &basis;
    let r = basis.ncols();
    let (map, k) = if r == 0 {
        (RMatrix::zeros(nv, 0), 0)
    } else {
        let keep: Vec<RVector> = if rows == 0 {
            Vec::new()
        } else {
            let svd = g.clone().svd(false, true);
            let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
            let vt = svd.v_t.unwrap();
            (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1.0))
                .map(|i| vt.row(i).transpose())
                .collect()
        };
        let pmat = if keep.is_empty() { RMatrix::zeros(r, 0) } else { RMatrix::from_columns(&keep) };
        let c_red = basis.transpose() * &c_full;
        let along = &pmat * (pmat.transpose() * &c_red);
        if (&c_red - along).norm() > 1e-9 * (1.0 + c_red.norm()) {
            return Reduction::Done(SdpStatus::Unbounded, y0);
        }
        let k = pmat.ncols();
        (&basis * pmat, k)
    };

    let y0_slice: Vec<f64> = y0.iter().copied().collect();
    let mut c = Vec::new();
    let mut a: Vec<Vec<Option<CMatrix>>> = vec![Vec::new(); k];
    let mut active = Vec::new();
    for (bi, blk) in p.blocks.iter().enumerate() {
        let f0 = blk.evaluate(&y0_slice);
        let mut mats: Vec<Option<CMatrix>> = vec![None; k];
        let mut any = false;
        for (v, m) in &blk.terms {
            for (l, slot) in mats.iter_mut().enumerate() {
                let coef = map[(*v, l)];
                if coef.abs() < 1e-15 {
                    continue;
                }
                let add = m.scale(coef);
                match slot {
                    Some(acc) => *acc += add,
                    None => *slot = Some(add),
                }
            }
        }
        let scale = f0.norm().max(1.0);
        for slot in mats.iter_mut() {
            if let Some(m) = slot {
                if m.norm() <= 1e-12 * scale {
                    *slot = None;
                } else {
                    any = true;
                }
            }
        }
        if !any {
            if linalg::min_eig(&f0) < -1e-9 * scale {
                return Reduction::Done(SdpStatus::Infeasible, y0);
            }
            continue;
        }
        active.push(bi);
        c.push(f0);
        for (l, m) in mats.into_iter().enumerate() {
            // standard form uses A_l = −F_l
            a[l].push(m.map(|m| -m));
        }
    }

    if k == 0 || active.is_empty() {
        return Reduction::Done(SdpStatus::Optimal, y0);
    }

    // column scaling: unit Frobenius norm for every A_l
    let mut map = map;
    let mut b = RVector::zeros(k);
    for l in 0..k {
        let nrm = a[l].iter().flatten().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        for m in a[l].iter_mut().flatten() {
            *m /= linalg::re(nrm);
        }
        map.column_mut(l).scale_mut(1.0 / nrm);
        let cl: f64 = map.column(l).dot(&c_full);
        b[l] = -cl;
    }

    Reduction::Ready(Reduced { c, a, b, y0, map, active })
}

/// Solve an LMI problem.
const NEAR_OPTIMAL: f64 = 1e2;

pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let finish = |status: SdpStatus, y: RVector, duals: Vec<CMatrix>, dual_obj: f64, iterations: usize| {
        let y: Vec<f64> = y.iter().copied().collect();
        let objective = p.objective_value(&y);
        let violation = p.violation(&y);
        SdpSolution { status, objective, dual_objective: dual_obj, y, duals, iterations, violation }
    };
    let zero_duals = || p.blocks.iter().map(|b| CMatrix::zeros(b.size, b.size)).collect::<Vec<_>>();

    let red = match reduce(p) {
        Reduction::Done(status, y0) => {
            let obj = p.objective_value(y0.as_slice());
            return finish(status, y0, zero_duals(), obj, 0);
        }
        Reduction::Ready(r) => r,
    };

    let (status, w, x, dobj, iterations) = hkm(&red, opts);
    let y = &red.y0 + &red.map * &w;
    let mut duals = zero_duals();
    for (i, &bi) in red.active.iter().enumerate() {
        duals[bi] = x[i].clone();
    }
    let const_part: f64 = red.y0.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
    let bound = if status == SdpStatus::Optimal { const_part - blocks_inner(&red.c, &x) } else { const_part - dobj };
    finish(status, y, duals, bound, iterations)
}

fn hermitize(m: &mut CMatrix) {
    let h = linalg::hermitian_part(m);
    *m = h;
}

/// Largest `α` with `x + α dx ⪰ 0` (infinite when unconstrained).
fn max_step(x: &[CMatrix], dx: &[CMatrix]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let Some(ch) = xb.clone().cholesky() else {
            return 0.0;
        };
        let l = ch.l();
        let t = l.solve_lower_triangular(db).unwrap();
        let t = l.solve_lower_triangular(&t.adjoint()).unwrap();
        let lam = linalg::min_eig(&t);
        if lam < 0.0 {
            alpha = alpha.min(-1.0 / lam);
        }
    }
    alpha
}

fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().cholesky().map(|c| c.inverse())
}

fn apply_a(a: &[Vec<Option<CMatrix>>], x: &[CMatrix]) -> RVector {
    RVector::from_iterator(
        a.len(),
        a.iter().map(|al| {
            al.iter().zip(x).map(|(m, xb)| m.as_ref().map_or(0.0, |m| linalg::real_inner(m, xb))).sum::<f64>()
        }),
    )
}

fn combine(a: &[Vec<Option<CMatrix>>], w: &RVector, sizes: &[usize]) -> Blocks {
    let mut out: Blocks = sizes.iter().map(|&n| CMatrix::zeros(n, n)).collect();
    for (l, al) in a.iter().enumerate() {
        if w[l] == 0.0 {
            continue;
        }
        for (ob, m) in out.iter_mut().zip(al) {
            if let Some(m) = m {
                *ob += m.scale(w[l]);
            }
        }
    }
    out
}

fn blocks_norm(b: &[CMatrix]) -> f64 {
    b.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn blocks_inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| linalg::real_inner(x, y)).sum()
}

#[allow(clippy::type_complexity)]
fn hkm(red: &Reduced, opts: &SdpOptions) -> (SdpStatus, RVector, Blocks, f64, usize) {
    let k = red.b.len();
    let sizes: Vec<usize> = red.c.iter().map(|m| m.nrows()).collect();
    let n_total: usize = sizes.iter().sum();
    let c_norm = blocks_norm(&red.c);
    let b_norm = red.b.norm();

    let xi_x = 10.0 * (1.0 + red.b.amax()).max((n_total as f64).sqrt());
    let xi_s = 10.0 * (1.0 + c_norm).max((n_total as f64).sqrt());
    let mut x: Blocks = sizes.iter().map(|&n| linalg::identity(n).scale(xi_x)).collect();
    let mut s: Blocks = sizes.iter().map(|&n| linalg::identity(n).scale(xi_s)).collect();
    let mut w = RVector::zeros(k);

    let mut best = (f64::INFINITY, w.clone(), x.clone(), 0.0);
    let mut status = SdpStatus::MaxIterations;
    let mut iter = 0;
    while iter < opts.max_iter {
        let ax = apply_a(&red.a, &x);
        let rp = &red.b - &ax;
        let aw = combine(&red.a, &w, &sizes);
        let rd: Blocks = (0..sizes.len()).map(|i| &red.c[i] - &aw[i] - &s[i]).collect();
        let mu = blocks_inner(&x, &s) / n_total as f64;
        let pobj = blocks_inner(&red.c, &x);
        let dobj = red.b.dot(&w);

        let rp_rel = rp.norm() / (1.0 + b_norm);
        let rd_rel = blocks_norm(&rd) / (1.0 + c_norm);
        let gap_rel = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = rp_rel.max(rd_rel).max(gap_rel);
        if merit < best.0 {
            best = (merit, w.clone(), x.clone(), dobj);
        }
        if !merit.is_finite() {
            status = SdpStatus::NumericalFailure;
            break;
        }
        if rp_rel <= opts.tol && rd_rel <= opts.tol && gap_rel <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        // stop once accuracy degrades after a near-optimal iterate
        if best.0 <= NEAR_OPTIMAL * opts.tol && merit > NEAR_OPTIMAL * best.0 {
            break;
        }

        // certificates of infeasibility / unboundedness
        let tr_x: f64 = x.iter().map(|m| linalg::trace(m).re).sum();
        if pobj < 0.0 && tr_x > 1.0 {
            let ax_hat = ax.norm() / tr_x;
            let cx_hat = -pobj / tr_x;
            if cx_hat > 1e-7 * (1.0 + c_norm) && ax_hat < 1e-9 * cx_hat.max(1e-300) * 1e3 {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        if tr_x > 1e14 {
            status = SdpStatus::Infeasible;
            break;
        }
        if dobj > 1e12 * (1.0 + c_norm) {
            status = SdpStatus::Unbounded;
            break;
        }

        let Some(s_inv): Option<Blocks> = s.iter().map(inverse).collect() else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        // Schur complement M_il = Re tr(A_i X A_l S⁻¹)
        let mut schur = RMatrix::zeros(k, k);
        for l in 0..k {
            let t: Vec<Option<CMatrix>> = red.a[l]
                .iter()
                .enumerate()
                .map(|(bi, m)| m.as_ref().map(|m| &x[bi] * m * &s_inv[bi]))
                .collect();
            for i in 0..=l {
                let mut v = 0.0;
                for (bi, tb) in t.iter().enumerate() {
                    if let (Some(ai), Some(tb)) = (&red.a[i][bi], tb) {
                        v += linalg::real_inner(ai, tb);
                    }
                }
                schur[(i, l)] = v;
                schur[(l, i)] = v;
            }
        }
        let Some(factor) = factorize(&schur) else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        let x_rd_sinv: Blocks = (0..sizes.len()).map(|i| &x[i] * &rd[i] * &s_inv[i]).collect();
        let direction = |rc: &Blocks| -> (RVector, Blocks, Blocks) {
            let h: Blocks = (0..sizes.len()).map(|i| &rc[i] - &x_rd_sinv[i]).collect();
            let rhs = &red.b - apply_a(&red.a, &h);
            let dw = factor.solve(&rhs);
            let adw = combine(&red.a, &dw, &sizes);
            let ds: Blocks = (0..sizes.len()).map(|i| &rd[i] - &adw[i]).collect();
            let dx: Blocks = (0..sizes.len())
                .map(|i| {
                    let mut m = &rc[i] - &x[i] - &x[i] * &ds[i] * &s_inv[i];
                    hermitize(&mut m);
                    m
                })
                .collect();
            (dw, dx, ds)
        };

        // predictor
        let zero: Blocks = sizes.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        let (_, dx_a, ds_a) = direction(&zero);
        let ap = max_step(&x, &dx_a).min(1.0);
        let ad = max_step(&s, &ds_a).min(1.0);
        let x_a: Blocks = (0..sizes.len()).map(|i| &x[i] + dx_a[i].scale(ap)).collect();
        let s_a: Blocks = (0..sizes.len()).map(|i| &s[i] + ds_a[i].scale(ad)).collect();
        let mu_a = blocks_inner(&x_a, &s_a) / n_total as f64;
        let sigma = (mu_a / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Blocks = (0..sizes.len())
            .map(|i| {
                let n = sizes[i];
                let target = linalg::identity(n).scale(sigma * mu) - &dx_a[i] * &ds_a[i];
                target * &s_inv[i]
            })
            .collect();
        let (dw, dx, ds) = direction(&rc);
        let ap = (opts.step_fraction * max_step(&x, &dx)).min(1.0);
        let ad = (opts.step_fraction * max_step(&s, &ds)).min(1.0);
        for i in 0..sizes.len() {
            x[i] += dx[i].scale(ap);
            s[i] += ds[i].scale(ad);
            hermitize(&mut x[i]);
            hermitize(&mut s[i]);
        }
        w += dw.scale(ad);
        iter += 1;
    }

    if status == SdpStatus::Optimal {
        let dobj = red.b.dot(&w);
        return (status, w, x, dobj, iter);
    }
    if matches!(status, SdpStatus::Infeasible | SdpStatus::Unbounded) {
        let dobj = red.b.dot(&w);
        return (status, w, x, dobj, iter);
    }
    let (merit, bw, bx, bd) = best;
    if merit <= NEAR_OPTIMAL * opts.tol {
        status = SdpStatus::Optimal;
    }
    (status, bw, bx, bd, iter)
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &RVector) -> RVector {
        match self {
            Factor::Chol(c) => c.solve(rhs),
            Factor::Lu(l) => l.solve(rhs).unwrap_or_else(|| RVector::zeros(rhs.len())),
        }
    }
}

fn factorize(m: &RMatrix) -> Option<Factor> {
    if let Some(c) = m.clone().cholesky() {
        return Some(Factor::Chol(c));
    }
    let k = m.nrows();
    let reg = 1e-14 * m.trace().abs().max(1.0) / k as f64;
    let shifted = m + RMatrix::identity(k, k) * reg;
    if let Some(c) = shifted.clone().cholesky() {
        return Some(Factor::Chol(c));
    }
    let lu = shifted.lu();
    if lu.is_invertible() {
        Some(Factor::Lu(lu))
    } else {
        None
    }
}
