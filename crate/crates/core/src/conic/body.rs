//! Convex body expressions over a real coordinate space `ℝ^D`.
//!
//! Matrix-valued nodes use the coordinates of [`linalg::hvec`], so a body at
//! matrix size `n` lives in `ℝ^{n²}`. Every node compiles to a lifted LMI
//! description of its homogenization `{(t, x) : x ∈ tB}`, which is what the
//! interior-point path consumes; closed-form projections are provided for the
//! nodes where they exist.

use super::sdp::{LinearEq, Lmi, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use crate::system::OperatorSystemSpec;
use std::sync::Arc;

/// Affine expression `Σ c·y_v + constant` in solver variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(), constant: self.constant * s }
    }
    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms, constant: self.constant + other.constant }
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * y[v]).sum::<f64>()
    }
}

/// Builder for an LMI whose coefficients are affine expressions.
pub struct LmiBuilder {
    lmi: Lmi,
}

impl LmiBuilder {
    pub fn new(size: usize) -> Self {
        Self { lmi: Lmi::new(size) }
    }

    /// Add `e · m` (with `m` Hermitian, full size).
    pub fn add(&mut self, e: &LinExpr, m: &CMatrix) {
        for &(v, c) in &e.terms {
            if c != 0.0 {
                self.lmi.add_term(v, m.scale(c));
            }
        }
        if e.constant != 0.0 {
            self.lmi.add_constant(&m.scale(e.constant));
        }
    }

    /// Add `e · m` at block offset `(i, j)` plus its adjoint at `(j, i)`.
    pub fn add_at(&mut self, e: &LinExpr, i: usize, j: usize, m: &CMatrix) {
        for &(v, c) in &e.terms {
            if c != 0.0 {
                self.lmi.add_term_at(v, i, j, &m.scale(c));
            }
        }
        if e.constant != 0.0 {
            self.lmi.add_constant_at(i, j, &m.scale(e.constant));
        }
    }

    pub fn finish(self, p: &mut SdpProblem) -> usize {
        p.add_lmi(self.lmi)
    }
}

pub fn add_eq_expr(p: &mut SdpProblem, e: &LinExpr) {
    p.add_eq(e.terms.clone(), -e.constant);
}

pub fn add_nonneg_expr(p: &mut SdpProblem, e: &LinExpr) -> usize {
    p.add_nonneg(e.terms.clone(), e.constant)
}

/// `Σ x_i E_i` over the orthonormal Hermitian basis of `H_n`.
pub fn hermitian_lmi(b: &mut LmiBuilder, x: &[LinExpr], n: usize) {
    for (e, m) in x.iter().zip(linalg::herm_basis(n)) {
        b.add(e, &m);
    }
}

/// A lifted LMI description `{x : ∃u, LMIs(t, x, u) ⪰ 0, eqs(t, x, u) = 0}`
/// of a homogenized body. Variable `0` is `t`, variables `1..=dim` are the
/// coordinates and the rest are auxiliary. Constants must be zero.
#[derive(Debug, Clone)]
pub struct LiftedRep {
    label: String,
    dim: usize,
    aux: usize,
    blocks: Vec<Lmi>,
    eqs: Vec<LinearEq>,
}

impl LiftedRep {
    pub fn new(label: &str, dim: usize, aux: usize) -> Self {
        Self { label: label.to_string(), dim, aux, blocks: Vec::new(), eqs: Vec::new() }
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn t(&self) -> usize {
        0
    }
    pub fn x(&self, i: usize) -> usize {
        1 + i
    }
    pub fn u(&self, j: usize) -> usize {
        assert!(j < self.aux, "auxiliary index out of range");
        1 + self.dim + j
    }
    pub fn add_lmi(&mut self, lmi: Lmi) {
        assert!(lmi.constant().norm() == 0.0, "lifted LMIs must be homogeneous");
        self.blocks.push(lmi);
    }
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>) {
        self.eqs.push(LinearEq { terms, rhs: 0.0 });
    }

    fn emit(&self, p: &mut SdpProblem, t: &LinExpr, x: &[LinExpr]) {
        let aux = p.add_vars(self.aux);
        let map = |v: usize| -> LinExpr {
            if v == 0 {
                t.clone()
            } else if v <= self.dim {
                x[v - 1].clone()
            } else {
                LinExpr::var(aux[v - 1 - self.dim])
            }
        };
        for blk in &self.blocks {
            let mut b = LmiBuilder::new(blk.size());
            for (v, m) in blk.terms() {
                b.add(&map(*v), m);
            }
            b.finish(p);
        }
        for eq in &self.eqs {
            let mut e = LinExpr::default();
            for &(v, c) in &eq.terms {
                e = e.add(&map(v).scale(c));
            }
            add_eq_expr(p, &e);
        }
    }
}

/// `M_n(S)^sa` as a subspace of `H_{nd}` (hvec coordinates).
#[derive(Debug, Clone)]
pub struct SubspaceData {
    pub label: String,
    /// Orthonormal basis (columns).
    pub basis: RMatrix,
    /// Orthonormal basis of the complement (columns).
    pub normals: RMatrix,
}

impl SubspaceData {
    pub fn new(label: &str, basis: RMatrix) -> Self {
        let normals = linalg::nullspace(&basis.transpose(), 1e-10);
        Self { label: label.to_string(), basis, normals }
    }
    pub fn project(&self, x: &RVector) -> RVector {
        &self.basis * (self.basis.transpose() * x)
    }
}

#[derive(Debug, Clone)]
pub enum ConvexBodyExpr {
    SystemSa(Arc<SubspaceData>),
    PsdCone { n: usize },
    NormBall { n: usize, radius: f64 },
    ConeCapBall { space: Arc<SubspaceData>, n: usize, radius: f64 },
    /// The affine subspace `{x : map·x = offset}`.
    AffineSlice { map: RMatrix, offset: RVector },
    Scale { factor: f64, child: Box<ConvexBodyExpr> },
    MinkowskiSum(Vec<ConvexBodyExpr>),
    MinkowskiDifference(Box<ConvexBodyExpr>, Box<ConvexBodyExpr>),
    ConvHullUnion(Box<ConvexBodyExpr>, Box<ConvexBodyExpr>),
    Intersection(Vec<ConvexBodyExpr>),
    Translate { shift: RVector, child: Box<ConvexBodyExpr> },
    Lifted(Arc<LiftedRep>),
}

impl ConvexBodyExpr {
    /// `M_n(S)^sa` inside `H_{nd}`.
    pub fn system_sa(spec: &OperatorSystemSpec, level: usize) -> Self {
        Self::SystemSa(Arc::new(system_subspace(spec, level)))
    }

    /// `M_n(S)^+ ∩ {‖x‖ ≤ radius}` inside `H_{nd}`.
    pub fn cone_cap_ball(spec: &OperatorSystemSpec, level: usize, radius: f64) -> Self {
        Self::ConeCapBall {
            space: Arc::new(system_subspace(spec, level)),
            n: level * spec.ambient_dim(),
            radius,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::Scale { factor, child: Box::new(self) }
    }

    pub fn translate(self, shift: RVector) -> Self {
        Self::Translate { shift, child: Box::new(self) }
    }

    pub fn minus(self, other: Self) -> Self {
        Self::MinkowskiDifference(Box::new(self), Box::new(other))
    }

    /// `K − K`.
    pub fn difference_body(&self) -> Self {
        self.clone().minus(self.clone())
    }

    /// `conv(K ∪ −K)`.
    pub fn symmetric_hull(&self) -> Self {
        Self::ConvHullUnion(Box::new(self.clone()), Box::new(self.clone().scale(-1.0)))
    }

    /// `{X ∈ H_n : a·1 ⪯ X ⪯ b·1}`.
    pub fn matrix_interval(n: usize, a: f64, b: f64) -> Self {
        let id = linalg::hvec(&linalg::identity(n));
        Self::Intersection(vec![
            Self::PsdCone { n }.translate(id.scale(a)),
            Self::PsdCone { n }.scale(-1.0).translate(id.scale(b)),
        ])
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self {
            Self::SystemSa(s) => s.basis.nrows(),
            Self::PsdCone { n } | Self::NormBall { n, .. } | Self::ConeCapBall { n, .. } => n * n,
            Self::AffineSlice { map, offset } => {
                if map.nrows() != offset.len() {
                    return Err(Error::DimensionMismatch { expected: map.nrows(), found: offset.len() });
                }
                map.ncols()
            }
            Self::Scale { child, .. } => child.dim()?,
            Self::Translate { shift, child } => {
                let d = child.dim()?;
                if d != shift.len() {
                    return Err(Error::DimensionMismatch { expected: d, found: shift.len() });
                }
                d
            }
            Self::MinkowskiSum(children) | Self::Intersection(children) => {
                let Some(first) = children.first() else {
                    return Err(Error::ShapeMismatch("empty body list".into()));
                };
                let d = first.dim()?;
                for c in &children[1..] {
                    let e = c.dim()?;
                    if e != d {
                        return Err(Error::DimensionMismatch { expected: d, found: e });
                    }
                }
                d
            }
            Self::MinkowskiDifference(a, b) | Self::ConvHullUnion(a, b) => {
                let (da, db) = (a.dim()?, b.dim()?);
                if da != db {
                    return Err(Error::DimensionMismatch { expected: da, found: db });
                }
                da
            }
            Self::Lifted(rep) => rep.dim,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::SystemSa(_) => "system_sa",
            Self::PsdCone { .. } => "psd_cone",
            Self::NormBall { .. } => "norm_ball",
            Self::ConeCapBall { .. } => "cone_cap_ball",
            Self::AffineSlice { .. } => "affine_slice",
            Self::Scale { .. } => "scale",
            Self::MinkowskiSum(_) => "minkowski_sum",
            Self::MinkowskiDifference(..) => "minkowski_difference",
            Self::ConvHullUnion(..) => "conv_hull_union",
            Self::Intersection(_) => "intersection",
            Self::Translate { .. } => "translate",
            Self::Lifted(_) => "lifted",
        }
    }

    /// Whether the reference engine has a projection oracle for this body.
    pub fn supports_projection(&self) -> bool {
        match self {
            Self::SystemSa(_)
            | Self::PsdCone { .. }
            | Self::NormBall { .. }
            | Self::ConeCapBall { .. }
            | Self::AffineSlice { .. } => true,
            Self::Scale { factor, child } => *factor != 0.0 && child.supports_projection(),
            Self::Translate { child, .. } => child.supports_projection(),
            Self::Intersection(children) => children.iter().all(|c| c.supports_projection()),
            Self::MinkowskiSum(_) | Self::MinkowskiDifference(..) | Self::ConvHullUnion(..) | Self::Lifted(_) => false,
        }
    }

    /// Constraints expressing `x ∈ t·B` for `t ≥ 0`.
    pub fn emit(&self, p: &mut SdpProblem, t: &LinExpr, x: &[LinExpr]) -> Result<()> {
        let d = self.dim()?;
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        match self {
            Self::SystemSa(s) => emit_subspace(p, s, x),
            Self::PsdCone { n } => {
                let mut b = LmiBuilder::new(*n);
                hermitian_lmi(&mut b, x, *n);
                b.finish(p);
            }
            Self::NormBall { n, radius } => emit_ball(p, *n, *radius, t, x),
            Self::ConeCapBall { space, n, radius } => {
                emit_subspace(p, space, x);
                let mut b = LmiBuilder::new(*n);
                hermitian_lmi(&mut b, x, *n);
                b.finish(p);
                let id = linalg::identity(*n);
                let mut hi = LmiBuilder::new(*n);
                hi.add(&t.scale(*radius), &id);
                let neg: Vec<LinExpr> = x.iter().map(|e| e.scale(-1.0)).collect();
                hermitian_lmi(&mut hi, &neg, *n);
                hi.finish(p);
            }
            Self::AffineSlice { map, offset } => {
                for i in 0..map.nrows() {
                    let mut e = t.scale(-offset[i]);
                    for (j, xj) in x.iter().enumerate() {
                        if map[(i, j)] != 0.0 {
                            e = e.add(&xj.scale(map[(i, j)]));
                        }
                    }
                    add_eq_expr(p, &e);
                }
            }
            Self::Scale { factor, child } => {
                if *factor == 0.0 {
                    for e in x {
                        add_eq_expr(p, e);
                    }
                } else {
                    let xs: Vec<LinExpr> = x.iter().map(|e| e.scale(1.0 / factor)).collect();
                    child.emit(p, t, &xs)?;
                }
            }
            Self::Translate { shift, child } => {
                let xs: Vec<LinExpr> = x.iter().zip(shift.iter()).map(|(e, &s)| e.sub(&t.scale(s))).collect();
                child.emit(p, t, &xs)?;
            }
            Self::MinkowskiSum(children) => {
                let mut rest: Vec<LinExpr> = x.to_vec();
                for (k, c) in children.iter().enumerate() {
                    if k + 1 == children.len() {
                        c.emit(p, t, &rest)?;
                    } else {
                        let part: Vec<LinExpr> = p.add_vars(d).into_iter().map(LinExpr::var).collect();
                        c.emit(p, t, &part)?;
                        rest = rest.iter().zip(&part).map(|(r, q)| r.sub(q)).collect();
                    }
                }
            }
            Self::MinkowskiDifference(a, b) => {
                let xb: Vec<LinExpr> = p.add_vars(d).into_iter().map(LinExpr::var).collect();
                let xa: Vec<LinExpr> = x.iter().zip(&xb).map(|(e, q)| e.add(q)).collect();
                a.emit(p, t, &xa)?;
                b.emit(p, t, &xb)?;
            }
            Self::ConvHullUnion(a, b) => {
                let ta = LinExpr::var(p.add_var());
                let tb = t.sub(&ta);
                add_nonneg_expr(p, &ta);
                add_nonneg_expr(p, &tb);
                let xa: Vec<LinExpr> = p.add_vars(d).into_iter().map(LinExpr::var).collect();
                let xb: Vec<LinExpr> = x.iter().zip(&xa).map(|(e, q)| e.sub(q)).collect();
                a.emit(p, &ta, &xa)?;
                b.emit(p, &tb, &xb)?;
            }
            Self::Intersection(children) => {
                for c in children {
                    c.emit(p, t, x)?;
                }
            }
            Self::Lifted(rep) => rep.emit(p, t, x),
        }
        Ok(())
    }
}

fn emit_subspace(p: &mut SdpProblem, s: &SubspaceData, x: &[LinExpr]) {
    for k in 0..s.normals.ncols() {
        let mut e = LinExpr::default();
        for (j, xj) in x.iter().enumerate() {
            let c = s.normals[(j, k)];
            if c.abs() > 1e-15 {
                e = e.add(&xj.scale(c));
            }
        }
        add_eq_expr(p, &e);
    }
}

fn emit_ball(p: &mut SdpProblem, n: usize, radius: f64, t: &LinExpr, x: &[LinExpr]) {
    let id = linalg::identity(n);
    for sign in [1.0, -1.0] {
        let mut b = LmiBuilder::new(n);
        b.add(&t.scale(radius), &id);
        let xs: Vec<LinExpr> = x.iter().map(|e| e.scale(sign)).collect();
        hermitian_lmi(&mut b, &xs, n);
        b.finish(p);
    }
}

/// Orthonormal hvec basis of `M_n(S)^sa ⊆ H_{nd}`.
pub fn system_subspace(spec: &OperatorSystemSpec, level: usize) -> SubspaceData {
    let frame = spec.frame(level);
    let nd = frame.ambient();
    let mut basis = RMatrix::zeros(nd * nd, frame.dim());
    for (j, g) in frame.matrices().iter().enumerate() {
        basis.set_column(j, &linalg::hvec(g));
    }
    SubspaceData::new(&format!("{}@{}", spec.name(), level), basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_mismatch() {
        let a = ConvexBodyExpr::PsdCone { n: 2 };
        assert_eq!(a.dim().unwrap(), 4);
        let bad = ConvexBodyExpr::Intersection(vec![a, ConvexBodyExpr::NormBall { n: 3, radius: 1.0 }]);
        assert_eq!(bad.dim().unwrap_err(), Error::DimensionMismatch { expected: 4, found: 9 });
    }

    #[test]
    fn projection_support_flags() {
        let a = ConvexBodyExpr::PsdCone { n: 2 };
        assert!(a.supports_projection());
        assert!(!a.difference_body().supports_projection());
        assert!(ConvexBodyExpr::matrix_interval(2, 0.0, 1.0).supports_projection());
    }
}
