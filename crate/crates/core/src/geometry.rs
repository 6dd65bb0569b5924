//! Levelwise noncommutative convex geometry: widths, the symmetric-hull
//! sandwich, separation certificates and inclusion constants.

use crate::conic::{ConicSolver, ConvexBodyExpr, SubspaceData};
use crate::duality::QuasistateBody;
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix, RVector};
use crate::rng;
use crate::system::OperatorSystemSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Interval { a: f64, b: f64 },
    PsdBall { d: usize },
    Quasistate { spec: String },
    Custom { label: String },
}

type Generator = Arc<dyn Fn(usize) -> Result<ConvexBodyExpr> + Send + Sync>;

/// A graded family `K = (K_n)` of compact convex bodies.
#[derive(Clone)]
pub struct NcBodyFamily {
    pub provenance: Provenance,
    pub max_level: usize,
    generator: Generator,
}

impl fmt::Debug for NcBodyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NcBodyFamily").field("provenance", &self.provenance).field("max_level", &self.max_level).finish()
    }
}

impl NcBodyFamily {
    pub fn custom(label: &str, max_level: usize, generator: impl Fn(usize) -> Result<ConvexBodyExpr> + Send + Sync + 'static) -> Self {
        Self { provenance: Provenance::Custom { label: label.into() }, max_level, generator: Arc::new(generator) }
    }

    /// `K_n = {X ∈ H_n : a ⪯ X ⪯ b}`.
    pub fn interval(a: f64, b: f64, max_level: usize) -> Self {
        Self {
            provenance: Provenance::Interval { a, b },
            max_level,
            generator: Arc::new(move |n| Ok(ConvexBodyExpr::matrix_interval(n, a, b))),
        }
    }

    /// `K_n = {X ∈ H_{nd} : 0 ⪯ X, ‖X‖ ≤ 1}`.
    pub fn psd_ball(d: usize, max_level: usize) -> Self {
        Self {
            provenance: Provenance::PsdBall { d },
            max_level,
            generator: Arc::new(move |n| {
                Ok(ConvexBodyExpr::Intersection(vec![
                    ConvexBodyExpr::PsdCone { n: n * d },
                    ConvexBodyExpr::NormBall { n: n * d, radius: 1.0 },
                ]))
            }),
        }
    }

    /// The nc quasistate space of a system.
    pub fn quasistate(spec: &OperatorSystemSpec) -> Self {
        let s = spec.clone();
        Self {
            provenance: Provenance::Quasistate { spec: spec.name().into() },
            max_level: spec.level_cap(),
            generator: Arc::new(move |n| Ok(QuasistateBody::new(&s, n).body)),
        }
    }

    pub fn body(&self, level: usize) -> Result<ConvexBodyExpr> {
        if level == 0 || level > self.max_level {
            return Err(Error::LevelOutOfRange { level, cap: self.max_level });
        }
        (self.generator)(level)
    }

    pub fn dim(&self, level: usize) -> Result<usize> {
        self.body(level)?.dim()
    }

    pub fn contains_origin(&self, level: usize, solver: &ConicSolver) -> Result<bool> {
        let b = self.body(level)?;
        let d = b.dim()?;
        Ok(solver.contains(&b, &RVector::zeros(d))?.0)
    }
}

/// `|K|_d = 1/γ_{K−K}(d)`, zero when the gauge is infinite.
pub fn width(k: &NcBodyFamily, d: &RVector, level: usize, solver: &ConicSolver) -> Result<f64> {
    let body = k.body(level)?.difference_body();
    let g = solver.gauge_unchecked(&body, d)?.value;
    Ok(if g.is_infinite() { 0.0 } else if g == 0.0 { f64::INFINITY } else { 1.0 / g })
}

/// `(γ_{K−K}(d), γ_{conv(K ∪ −K)}(d))`.
pub fn dual_norm_sandwich(k: &NcBodyFamily, d: &RVector, level: usize, solver: &ConicSolver) -> Result<(f64, f64)> {
    let body = k.body(level)?;
    let dim = body.dim()?;
    let (inside, dist) = solver.contains(&body, &RVector::zeros(dim))?;
    if !inside {
        return Err(Error::OriginNotInBody { distance: dist });
    }
    let lo = solver.gauge_unchecked(&body.difference_body(), d)?.value;
    let hull = solver.gauge_unchecked(&body.symmetric_hull(), d)?.value;
    Ok((lo, hull))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub level: usize,
    /// `f(y) = ⟨functional, y⟩`.
    pub functional: Vec<f64>,
    pub threshold: f64,
    pub margin: f64,
    /// `f(x)` at the separated point.
    pub value: f64,
    /// `sup_K f` as computed by the support oracle.
    pub support: f64,
    /// Largest `f` seen over the revalidation samples.
    pub sampled_max: f64,
    pub samples: usize,
}

impl SeparationCertificate {
    pub fn evaluate(&self, y: &RVector) -> f64 {
        self.functional.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Points of a body: random convex combinations of support maximizers of
/// random directions.
pub fn sample_body(
    body: &ConvexBodyExpr,
    count: usize,
    extremes: usize,
    stream: (u64, &str),
    solver: &ConicSolver,
) -> Result<Vec<RVector>> {
    let d = body.dim()?;
    let pool: Vec<Result<RVector>> = (0..extremes)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(stream.0, "geometry", &format!("{}/extreme", stream.1), i as u64);
            Ok(solver.support_max(body, &rng::unit_sphere(&mut g, d))?.point)
        })
        .collect();
    let pool = pool.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut g = rng::stream(stream.0, "geometry", &format!("{}/mix", stream.1), i as u64);
        let w: Vec<f64> = (0..pool.len()).map(|_| -rng::uniform(&mut g).max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut p = RVector::zeros(d);
        for (wi, q) in w.iter().zip(&pool) {
            p += q.scale(wi / total);
        }
        out.push(p);
    }
    out.extend(pool);
    Ok(out)
}

/// Separate `x` from `K_n` by a scalar functional with `sup_K f ≤ 1 < f(x)`.
pub fn separate_point(
    k: &NcBodyFamily,
    x: &RVector,
    level: usize,
    samples: usize,
    seed: u64,
    solver: &ConicSolver,
) -> Result<Option<SeparationCertificate>> {
    let body = k.body(level)?;
    let (p, _) = solver.project_body(&body, x)?;
    let g = x - &p;
    if g.norm() <= solver.feas_tol {
        return Ok(None);
    }
    let h = solver.support_max(&body, &g)?.value;
    let vx = g.dot(x);
    let cal = if h > solver.feas_tol { h } else { 0.5 * (h + vx) };
    if vx <= cal {
        return Ok(None);
    }
    let f = g.unscale(cal);
    let points = sample_body(&body, samples, 40, (seed, "separate"), solver)?;
    let sampled_max = points.iter().map(|q| f.dot(q)).fold(f64::NEG_INFINITY, f64::max);
    let value = f.dot(x);
    Ok(Some(SeparationCertificate {
        level,
        functional: f.iter().copied().collect(),
        threshold: 1.0,
        margin: value - 1.0,
        value,
        support: h / cal,
        sampled_max,
        samples: points.len(),
    }))
}

/// Orthonormal basis (columns) of the real span of a body, from support
/// maximizers of random directions.
pub fn body_span(body: &ConvexBodyExpr, seed: u64, solver: &ConicSolver) -> Result<RMatrix> {
    let d = body.dim()?;
    let mut pts: Vec<RVector> = Vec::new();
    let mut rank = 0;
    let mut stale = 0;
    for i in 0..(4 * d + 20) {
        let mut g = rng::stream(seed, "geometry", "span", i as u64);
        pts.push(solver.support_max(body, &rng::unit_sphere(&mut g, d))?.point);
        let r = linalg::rank(&RMatrix::from_columns(&pts), 1e-7);
        if r > rank {
            rank = r;
            stale = 0;
        } else {
            stale += 1;
        }
        if rank == d || stale >= 6 {
            break;
        }
    }
    Ok(linalg::column_space(&RMatrix::from_columns(&pts), 1e-7))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub level: usize,
    #[serde(with = "crate::serde_f64::extended")]
    pub c_hat: f64,
    /// `1/Ĉ`, with `Ĉ·ĉ = 1` exactly.
    #[serde(with = "crate::serde_f64::extended")]
    pub c_small: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// A float `y` with `x·y == 1` exactly when one exists next to `1/x`.
pub fn exact_reciprocal(x: f64) -> f64 {
    let y = 1.0 / x;
    if !y.is_finite() || y == 0.0 {
        return y;
    }
    [y, y.next_up(), y.next_down()].into_iter().find(|c| x * c == 1.0).unwrap_or(y)
}

/// The float nearest to `x` (upward first) that has an exact reciprocal,
/// together with that reciprocal.
pub fn reciprocal_pair(x: f64) -> (f64, f64) {
    if !x.is_finite() || x <= 0.0 {
        return (x, exact_reciprocal(x));
    }
    let (mut up, mut down) = (x, x);
    for _ in 0..64 {
        for c in [up, down] {
            let y = exact_reciprocal(c);
            if c * y == 1.0 {
                return (c, y);
            }
        }
        up = up.next_up();
        down = down.next_down();
    }
    (x, 1.0 / x)
}

fn directions(span: &RMatrix, samples: usize, seed: u64, label: &str) -> Vec<RVector> {
    let k = span.ncols();
    let mut dirs = Vec::new();
    for j in 0..k {
        dirs.push(span.column(j).into_owned());
        dirs.push(-span.column(j).into_owned());
    }
    for i in 0..samples {
        let mut g = rng::stream(seed, "geometry", label, i as u64);
        dirs.push(span * rng::unit_sphere(&mut g, k));
    }
    dirs
}

fn check_nested(l: &ConvexBodyExpr, k: &ConvexBodyExpr, seed: u64, solver: &ConicSolver) -> Result<()> {
    let d = l.dim()?;
    for i in 0..8 {
        let mut g = rng::stream(seed, "geometry", "nested", i);
        let p = solver.support_max(l, &rng::unit_sphere(&mut g, d))?.point;
        let (inside, dist) = solver.contains(k, &p)?;
        if !inside {
            return Err(Error::NotNested { distance: dist });
        }
    }
    Ok(())
}

/// Lower bound for the smallest `C` with `(K − K) ∩ span L ⊆ C (L − L)`.
pub fn extension_constant(
    l: &NcBodyFamily,
    k: &NcBodyFamily,
    level: usize,
    samples: usize,
    seed: u64,
    solver: &ConicSolver,
) -> Result<ExtensionReport> {
    let lb = l.body(level)?;
    let kb = k.body(level)?;
    let d = lb.dim()?;
    if kb.dim()? != d {
        return Err(Error::DimensionMismatch { expected: d, found: kb.dim()? });
    }
    check_nested(&lb, &kb, seed, solver)?;
    let span = body_span(&lb, seed, solver)?;
    let dirs = directions(&span, samples, seed, "extension");
    let ld = lb.difference_body();
    let kd = kb.difference_body();
    let ratios: Vec<Result<f64>> = dirs
        .par_iter()
        .map(|v| {
            let gk = solver.gauge_unchecked(&kd, v)?.value;
            let gl = solver.gauge_unchecked(&ld, v)?.value;
            Ok(if gk == 0.0 { 0.0 } else { gl / gk })
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, r) in ratios.into_iter().enumerate() {
        let r = r?;
        if r > best.0 {
            best = (r, i);
        }
    }
    let (c_hat, c_small) = reciprocal_pair(best.0.max(1e-300));
    Ok(ExtensionReport {
        level,
        c_hat,
        c_small,
        witness: dirs[best.1].iter().copied().collect(),
        samples: dirs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEmbeddingReport {
    pub level: usize,
    pub pass: bool,
    /// A point of `K ∩ span L` outside `ℝ₊L`.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
}

/// Search for `x ∈ K_n ∩ span L_n` with `x ∉ ℝ₊ L_n`.
pub fn order_embedding_check(
    l: &NcBodyFamily,
    k: &NcBodyFamily,
    level: usize,
    samples: usize,
    seed: u64,
    solver: &ConicSolver,
) -> Result<OrderEmbeddingReport> {
    let lb = l.body(level)?;
    let kb = k.body(level)?;
    let span = body_span(&lb, seed, solver)?;
    let space = Arc::new(SubspaceData::new("span L", span.clone()));
    let slice = ConvexBodyExpr::Intersection(vec![kb, ConvexBodyExpr::SystemSa(space)]);
    let dirs = directions(&span, samples, seed, "order_embedding");
    let found: Vec<Result<Option<RVector>>> = dirs
        .par_iter()
        .map(|v| {
            let x = solver.support_max(&slice, v)?.point;
            if x.norm() <= solver.feas_tol {
                return Ok(None);
            }
            let g = solver.gauge_unchecked(&lb, &x)?;
            Ok(g.value.is_infinite().then_some(x))
        })
        .collect();
    for f in found {
        if let Some(x) = f? {
            return Ok(OrderEmbeddingReport { level, pass: false, witness: Some(x.iter().copied().collect()), samples: dirs.len() });
        }
    }
    Ok(OrderEmbeddingReport { level, pass: true, witness: None, samples: dirs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, hvec};
    use approx::assert_relative_eq;

    fn scalar(x: f64) -> RVector {
        RVector::from_element(1, x)
    }

    #[test]
    fn interval_width() {
        let s = ConicSolver::default();
        let k = NcBodyFamily::interval(0.0, 1.0, 2);
        assert_relative_eq!(width(&k, &scalar(1.0), 1, &s).unwrap(), 1.0, epsilon = 1e-7);
        assert_relative_eq!(width(&k, &scalar(2.0), 1, &s).unwrap(), 0.5, epsilon = 1e-7);
    }

    #[test]
    fn sandwich_examples() {
        let s = ConicSolver::default();
        let k = NcBodyFamily::interval(0.0, 1.0, 2);
        let (lo, hull) = dual_norm_sandwich(&k, &scalar(1.0), 1, &s).unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-7);
        assert_relative_eq!(hull, 1.0, epsilon = 1e-7);
        let b = NcBodyFamily::psd_ball(2, 1);
        let (lo, hull) = dual_norm_sandwich(&b, &hvec(&diag_real(&[1.0, -1.0])), 1, &s).unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-7);
        assert_relative_eq!(hull, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn separation_examples() {
        let s = ConicSolver::default();
        let k = NcBodyFamily::interval(0.0, 1.0, 1);
        let c = separate_point(&k, &scalar(2.0), 1, 50, 0, &s).unwrap().unwrap();
        assert_relative_eq!(c.functional[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(c.value, 2.0, epsilon = 1e-6);
        assert_relative_eq!(c.margin, 1.0, epsilon = 1e-6);
        assert!(separate_point(&k, &scalar(0.5), 1, 10, 0, &s).unwrap().is_none());
        let b = NcBodyFamily::psd_ball(2, 1);
        let c = separate_point(&b, &hvec(&diag_real(&[2.0, 0.0])), 1, 100, 0, &s).unwrap().unwrap();
        assert_relative_eq!(c.value, 2.0, epsilon = 1e-6);
        assert!(c.sampled_max <= 1.0 + 1e-8);
    }

    #[test]
    fn extension_of_intervals() {
        let s = ConicSolver::default();
        let l = NcBodyFamily::interval(0.0, 1.0, 2);
        let k = NcBodyFamily::interval(-1.0, 1.0, 2);
        let r = extension_constant(&l, &k, 1, 10, 0, &s).unwrap();
        assert_relative_eq!(r.c_hat, 2.0, epsilon = 1e-6);
        assert_eq!(r.c_hat * r.c_small, 1.0);
        let k2 = NcBodyFamily::interval(-2.0, 2.0, 2);
        assert_relative_eq!(extension_constant(&l, &k2, 1, 10, 0, &s).unwrap().c_hat, 4.0, epsilon = 1e-6);
        assert!(matches!(extension_constant(&k, &l, 1, 4, 0, &s), Err(Error::NotNested { .. })));
    }

    #[test]
    fn order_embedding_examples() {
        let s = ConicSolver::default();
        let l = NcBodyFamily::interval(0.0, 1.0, 1);
        let r = order_embedding_check(&l, &NcBodyFamily::interval(-1.0, 1.0, 1), 1, 8, 0, &s).unwrap();
        assert!(!r.pass);
        assert_relative_eq!(r.witness.unwrap()[0], -1.0, epsilon = 1e-6);
        assert!(order_embedding_check(&l, &l, 1, 8, 0, &s).unwrap().pass);
        assert!(order_embedding_check(&l, &NcBodyFamily::interval(0.0, 2.0, 1), 1, 8, 0, &s).unwrap().pass);
    }

    #[test]
    fn reciprocal_is_exact() {
        for x in [2.0, 3.0, 49.0, 1.000_000_1, 7.3] {
            let y = exact_reciprocal(x);
            assert!((x * y - 1.0).abs() <= f64::EPSILON);
        }
        assert_eq!(2.0 * exact_reciprocal(2.0), 1.0);
    }
}
