//! Closed-form projections and Dykstra's cyclic projection scheme.

use super::body::ConvexBodyExpr;
use crate::error::{Error, Result};
use crate::linalg::{self, RVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStatus {
    pub status: FeasibilityStatus,
    #[serde(with = "crate::serde_f64::extended")]
    pub residual: f64,
    pub iterations: usize,
    pub point: Option<Vec<f64>>,
}

impl SolveStatus {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DykstraOptions {
    pub feas_tol: f64,
    pub max_sweeps: usize,
    /// Sweeps over which a non-shrinking gap is taken as infeasibility.
    pub stall_window: usize,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, max_sweeps: 10_000, stall_window: 50 }
    }
}

/// PSD cone projection: clip negative eigenvalues.
pub fn project_psd(x: &RVector, n: usize) -> RVector {
    linalg::hvec(&linalg::clip_spectrum(&linalg::hmat(x, n), 0.0, f64::INFINITY))
}

/// Operator-norm ball projection: clip eigenvalues into `[−r, r]`.
pub fn project_ball(x: &RVector, n: usize, radius: f64) -> RVector {
    linalg::hvec(&linalg::clip_spectrum(&linalg::hmat(x, n), -radius, radius))
}

/// Euclidean projection onto a projection-capable body. Intersections are
/// handled by Dykstra's algorithm; the returned status carries its log.
pub fn project(body: &ConvexBodyExpr, x: &RVector, opts: &DykstraOptions) -> Result<(RVector, SolveStatus)> {
    let exact = |p: RVector| {
        let status = SolveStatus { status: FeasibilityStatus::Feasible, residual: 0.0, iterations: 0, point: None };
        (p, status)
    };
    Ok(match body {
        ConvexBodyExpr::SystemSa(s) => exact(s.project(x)),
        ConvexBodyExpr::PsdCone { n } => exact(project_psd(x, *n)),
        ConvexBodyExpr::NormBall { n, radius } => exact(project_ball(x, *n, *radius)),
        ConvexBodyExpr::AffineSlice { map, offset } => {
            let r = map * x - offset;
            let corr = linalg::lstsq(map, &r, 1e-12 * map.norm().max(1.0));
            exact(x - corr)
        }
        ConvexBodyExpr::Translate { shift, child } => {
            let (p, st) = project(child, &(x - shift), opts)?;
            (p + shift, st)
        }
        ConvexBodyExpr::Scale { factor, child } if *factor != 0.0 => {
            let (p, st) = project(child, &x.unscale(*factor), opts)?;
            (p.scale(*factor), st)
        }
        ConvexBodyExpr::ConeCapBall { space, n, radius } => {
            let parts = [
                ConvexBodyExpr::SystemSa(space.clone()),
                ConvexBodyExpr::PsdCone { n: *n },
                ConvexBodyExpr::NormBall { n: *n, radius: *radius },
            ];
            dykstra(&parts.iter().collect::<Vec<_>>(), x, opts)?
        }
        ConvexBodyExpr::Intersection(children) => dykstra(&children.iter().collect::<Vec<_>>(), x, opts)?,
        other => return Err(Error::UnsupportedNode(format!("projection onto {}", other.kind()))),
    })
}

/// Distance from `x` to a projection-capable body.
pub fn distance(body: &ConvexBodyExpr, x: &RVector, opts: &DykstraOptions) -> Result<f64> {
    let (p, _) = project(body, x, opts)?;
    Ok((x - p).norm())
}

/// Dykstra's algorithm: converges to the projection of `x0` onto the
/// intersection of `bodies` when it is nonempty.
pub fn dykstra(bodies: &[&ConvexBodyExpr], x0: &RVector, opts: &DykstraOptions) -> Result<(RVector, SolveStatus)> {
    if bodies.is_empty() {
        return Err(Error::ShapeMismatch("empty body list".into()));
    }
    let d = x0.len();
    for b in bodies {
        let e = b.dim()?;
        if e != d {
            return Err(Error::DimensionMismatch { expected: d, found: e });
        }
    }
    let mut x = x0.clone();
    let mut incr = vec![RVector::zeros(d); bodies.len()];
    let mut gaps: Vec<f64> = Vec::new();
    let mut status = FeasibilityStatus::MaxIter;
    let mut gap = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        let prev = x.clone();
        for (b, p) in bodies.iter().zip(incr.iter_mut()) {
            let (y, _) = project(b, &(&x + &*p), opts)?;
            *p = &x + &*p - &y;
            x = y;
        }
        sweeps += 1;
        gap = 0.0;
        for b in bodies {
            gap = gap.max(distance(b, &x, opts)?);
        }
        let moved = (&x - &prev).norm();
        if gap <= opts.feas_tol && moved <= opts.feas_tol {
            status = FeasibilityStatus::Feasible;
            break;
        }
        gaps.push(gap);
        let w = opts.stall_window;
        if gaps.len() > w && gap > opts.feas_tol {
            let old = gaps[gaps.len() - 1 - w];
            if old - gap <= 1e-6 * gap {
                status = FeasibilityStatus::Infeasible;
                break;
            }
        }
    }
    let st = SolveStatus { status, residual: gap, iterations: sweeps, point: Some(x.iter().copied().collect()) };
    Ok((x, st))
}
