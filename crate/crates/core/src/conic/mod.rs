//! Convex bodies and the conic engine.
//!
//! Two engines share one interface. The interior-point path compiles a body
//! to LMIs and is the default wherever values must be accurate; the
//! projection path (closed forms, Dykstra, bisection, projected gradient)
//! needs nothing beyond eigendecompositions and serves as a reference.

pub mod body;
pub mod project;
pub mod sdp;

pub use body::{ConvexBodyExpr, LiftedRep, LinExpr, LmiBuilder, SubspaceData};
pub use project::{DykstraOptions, FeasibilityStatus, SolveStatus};
pub use sdp::{Lmi, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

use crate::error::{Error, Result};
use crate::linalg::RVector;
use crate::system::ToleranceConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Anything that can solve an [`SdpProblem`].
///
/// Implementations must be deterministic for a fixed input and must report
/// the true constraint violation of the point they return.
pub trait SolverAdapter: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem) -> SdpSolution;
}

#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub options: SdpOptions,
}

impl SolverAdapter for InteriorPoint {
    fn name(&self) -> &str {
        "interior_point"
    }
    fn solve(&self, problem: &SdpProblem) -> SdpSolution {
        sdp::solve(problem, &self.options)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    InteriorPoint,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeValue {
    /// `+∞` when no `t ≤ t_max` admits membership.
    #[serde(with = "crate::serde_f64::extended")]
    pub value: f64,
    pub capped: bool,
    pub status: SdpStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportValue {
    pub value: f64,
    pub point: RVector,
    pub status: SdpStatus,
}

#[derive(Debug, Clone)]
pub struct ConicSolver {
    pub engine: Engine,
    pub adapter: Arc<dyn SolverAdapter>,
    pub feas_tol: f64,
    pub bisect_tol: f64,
    pub t_max: f64,
    pub dykstra: DykstraOptions,
    pub restarts: usize,
}

impl Default for ConicSolver {
    fn default() -> Self {
        Self::from_tolerances(&ToleranceConfig::default())
    }
}

impl ConicSolver {
    pub fn from_tolerances(tol: &ToleranceConfig) -> Self {
        Self {
            engine: Engine::InteriorPoint,
            adapter: Arc::new(InteriorPoint::default()),
            feas_tol: tol.feas_tol,
            bisect_tol: tol.bisect_tol,
            t_max: 1e6,
            dykstra: DykstraOptions { feas_tol: tol.feas_tol, ..DykstraOptions::default() },
            restarts: 4,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_adapter(mut self, adapter: Arc<dyn SolverAdapter>) -> Self {
        self.adapter = adapter;
        self
    }

    pub fn solve(&self, p: &SdpProblem) -> SdpSolution {
        self.adapter.solve(p)
    }

    fn use_projection(&self, body: &ConvexBodyExpr) -> Result<bool> {
        match self.engine {
            Engine::InteriorPoint => Ok(false),
            Engine::Projection if body.supports_projection() => Ok(true),
            Engine::Projection => Err(Error::UnsupportedNode(format!("reference engine on {}", body.kind()))),
        }
    }

    /// Nearest point of `body` to `point`.
    pub fn project_body(&self, body: &ConvexBodyExpr, point: &RVector) -> Result<(RVector, SolveStatus)> {
        check_dim(body, point)?;
        if body.supports_projection() {
            let (p, st) = project::project(body, point, &self.dykstra)?;
            if st.status == FeasibilityStatus::MaxIter {
                return Err(Error::MaxIterations { residual: st.residual });
            }
            return Ok((p, st));
        }
        self.use_projection(body)?;
        let d = point.len();
        let mut p = SdpProblem::new();
        let r = p.add_var();
        let xs = p.add_vars(d);
        let x: Vec<LinExpr> = xs.iter().map(|&v| LinExpr::var(v)).collect();
        body.emit(&mut p, &LinExpr::constant(1.0), &x)?;
        // ‖x − point‖ ≤ r as an arrow LMI
        let mut arrow = LmiBuilder::new(d + 1);
        let r_e = LinExpr::var(r);
        for i in 0..=d {
            arrow.add(&r_e, &crate::linalg::unit(d + 1, i, i));
        }
        for i in 0..d {
            let e = x[i].sub(&LinExpr::constant(point[i]));
            arrow.add_at(&e, 0, i + 1, &crate::linalg::identity(1));
        }
        arrow.finish(&mut p);
        p.minimize(r, 1.0);
        let sol = self.solve(&p);
        let proj = RVector::from_iterator(d, xs.iter().map(|&v| sol.y[v]));
        let status = match sol.status {
            SdpStatus::Optimal => FeasibilityStatus::Feasible,
            SdpStatus::Infeasible => return Err(Error::Infeasible("projection onto an empty body".into())),
            _ => FeasibilityStatus::MaxIter,
        };
        if status == FeasibilityStatus::MaxIter {
            return Err(Error::MaxIterations { residual: sol.violation });
        }
        Ok((proj.clone(), SolveStatus { status, residual: sol.violation, iterations: sol.iterations, point: Some(proj.iter().copied().collect()) }))
    }

    /// Membership test; returns the decision and the residual that decided it.
    pub fn contains(&self, body: &ConvexBodyExpr, x: &RVector) -> Result<(bool, f64)> {
        check_dim(body, x)?;
        if self.use_projection(body)? {
            let dist = project::distance(body, x, &self.dykstra)?;
            return Ok((dist <= self.feas_tol, dist));
        }
        let mut p = SdpProblem::new();
        let xe: Vec<LinExpr> = x.iter().map(|&c| LinExpr::constant(c)).collect();
        body.emit(&mut p, &LinExpr::constant(1.0), &xe)?;
        let s = relax(&mut p);
        let sol = self.solve(&p);
        match sol.status {
            SdpStatus::Infeasible => Ok((false, f64::INFINITY)),
            _ => {
                let slack = sol.y.get(s).copied().unwrap_or(0.0).max(0.0);
                Ok((slack <= self.feas_tol, slack))
            }
        }
    }

    /// Joint feasibility of several bodies in one space.
    pub fn check_feasible(&self, bodies: &[ConvexBodyExpr]) -> Result<SolveStatus> {
        let Some(first) = bodies.first() else {
            return Err(Error::ShapeMismatch("no bodies given".into()));
        };
        let d = first.dim()?;
        for b in bodies {
            let e = b.dim()?;
            if e != d {
                return Err(Error::DimensionMismatch { expected: d, found: e });
            }
        }
        let all_proj = bodies.iter().all(|b| b.supports_projection());
        if self.engine == Engine::Projection {
            if !all_proj {
                return Err(Error::UnsupportedNode("reference feasibility needs projection oracles".into()));
            }
            let refs: Vec<&ConvexBodyExpr> = bodies.iter().collect();
            let (_, st) = project::dykstra(&refs, &RVector::zeros(d), &self.dykstra)?;
            return Ok(st);
        }
        let mut p = SdpProblem::new();
        let xs = p.add_vars(d);
        let x: Vec<LinExpr> = xs.iter().map(|&v| LinExpr::var(v)).collect();
        for b in bodies {
            b.emit(&mut p, &LinExpr::constant(1.0), &x)?;
        }
        let s = relax(&mut p);
        let sol = self.solve(&p);
        let point: Vec<f64> = xs.iter().map(|&v| sol.y[v]).collect();
        let st = match sol.status {
            SdpStatus::Infeasible => SolveStatus { status: FeasibilityStatus::Infeasible, residual: f64::INFINITY, iterations: sol.iterations, point: None },
            SdpStatus::Optimal => {
                let slack = sol.y[s];
                let status = if slack <= self.feas_tol { FeasibilityStatus::Feasible } else { FeasibilityStatus::Infeasible };
                SolveStatus { status, residual: slack.max(0.0), iterations: sol.iterations, point: Some(point) }
            }
            _ => SolveStatus { status: FeasibilityStatus::MaxIter, residual: sol.y[s].max(0.0), iterations: sol.iterations, point: Some(point) },
        };
        Ok(st)
    }

    /// Minkowski gauge `inf{t ≥ 0 : x ∈ tB}`; checks `0 ∈ B` first.
    pub fn gauge(&self, body: &ConvexBodyExpr, x: &RVector) -> Result<GaugeValue> {
        check_dim(body, x)?;
        let (inside, dist) = self.contains(body, &RVector::zeros(x.len()))?;
        if !inside {
            return Err(Error::OriginNotInBody { distance: dist });
        }
        self.gauge_unchecked(body, x)
    }

    /// Gauge for a body already known to contain the origin.
    pub fn gauge_unchecked(&self, body: &ConvexBodyExpr, x: &RVector) -> Result<GaugeValue> {
        check_dim(body, x)?;
        if x.iter().all(|&c| c == 0.0) {
            return Ok(GaugeValue { value: 0.0, capped: false, status: SdpStatus::Optimal });
        }
        if self.use_projection(body)? {
            return self.gauge_bisect(body, x);
        }
        let mut p = SdpProblem::new();
        let t = p.add_var();
        let xe: Vec<LinExpr> = x.iter().map(|&c| LinExpr::constant(c)).collect();
        body.emit(&mut p, &LinExpr::var(t), &xe)?;
        p.add_nonneg(vec![(t, 1.0)], 0.0);
        p.add_nonneg(vec![(t, -1.0)], self.t_max);
        p.minimize(t, 1.0);
        let sol = self.solve(&p);
        let infinite = GaugeValue { value: f64::INFINITY, capped: true, status: sol.status };
        match sol.status {
            SdpStatus::Infeasible => Ok(infinite),
            SdpStatus::Optimal => {
                let v = sol.y[t];
                if v >= self.t_max * (1.0 - 1e-6) {
                    Ok(infinite)
                } else {
                    Ok(GaugeValue { value: v.max(0.0), capped: false, status: sol.status })
                }
            }
            _ => {
                // decide finiteness separately before trusting a degraded value
                let (inside, _) = self.contains(body, &x.unscale(self.t_max))?;
                if !inside {
                    Ok(infinite)
                } else {
                    Ok(GaugeValue { value: sol.y[t].max(0.0), capped: false, status: sol.status })
                }
            }
        }
    }

    fn gauge_bisect(&self, body: &ConvexBodyExpr, x: &RVector) -> Result<GaugeValue> {
        let member = |t: f64| -> Result<bool> { Ok(project::distance(body, &x.unscale(t), &self.dykstra)? <= self.feas_tol) };
        let mut hi = 1.0;
        while !member(hi)? {
            hi *= 2.0;
            if hi > self.t_max {
                return Ok(GaugeValue { value: f64::INFINITY, capped: true, status: SdpStatus::Infeasible });
            }
        }
        if hi <= 1.0 {
            while hi > self.bisect_tol && member(hi / 2.0)? {
                hi /= 2.0;
            }
        }
        let mut lo = hi / 2.0;
        while hi - lo > self.bisect_tol * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if member(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(GaugeValue { value: hi, capped: false, status: SdpStatus::Optimal })
    }

    /// `sup{⟨c, x⟩ : x ∈ B}` with a maximizer.
    pub fn support_max(&self, body: &ConvexBodyExpr, c: &RVector) -> Result<SupportValue> {
        check_dim(body, c)?;
        let d = c.len();
        if self.use_projection(body)? {
            return self.support_projected_gradient(body, c);
        }
        let mut p = SdpProblem::new();
        let xs = p.add_vars(d);
        let x: Vec<LinExpr> = xs.iter().map(|&v| LinExpr::var(v)).collect();
        body.emit(&mut p, &LinExpr::constant(1.0), &x)?;
        for (&v, &ci) in xs.iter().zip(c.iter()) {
            p.minimize(v, -ci);
        }
        let sol = self.solve(&p);
        match sol.status {
            SdpStatus::Unbounded => Err(Error::UnboundedBody),
            SdpStatus::Infeasible => Err(Error::Infeasible("support of an empty body".into())),
            status => {
                let point = RVector::from_iterator(d, xs.iter().map(|&v| sol.y[v]));
                Ok(SupportValue { value: c.dot(&point), point, status })
            }
        }
    }

    fn support_projected_gradient(&self, body: &ConvexBodyExpr, c: &RVector) -> Result<SupportValue> {
        let d = c.len();
        let cn = c.norm();
        let (mut best_x, _) = project::project(body, &RVector::zeros(d), &self.dykstra)?;
        if cn == 0.0 {
            return Ok(SupportValue { value: 0.0, point: best_x, status: SdpStatus::Optimal });
        }
        let mut best = c.dot(&best_x);
        for k in 0..self.restarts.max(1) {
            // deterministic starts: origin and a few signed rescalings of c
            let start = c.scale(((k as f64) - 1.0) / cn);
            let (mut x, _) = project::project(body, &start, &self.dykstra)?;
            let step = 1.0 / cn;
            for _ in 0..2000 {
                let (y, _) = project::project(body, &(&x + c.scale(step)), &self.dykstra)?;
                let moved = (&y - &x).norm();
                x = y;
                if moved <= self.feas_tol {
                    break;
                }
            }
            let v = c.dot(&x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        Ok(SupportValue { value: best, point: best_x, status: SdpStatus::Optimal })
    }
}

fn check_dim(body: &ConvexBodyExpr, x: &RVector) -> Result<()> {
    let d = body.dim()?;
    if d != x.len() {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    Ok(())
}

/// Add a slack `s` to every LMI (`F + sI ⪰ 0`), bound `s ≥ −1`, minimize `s`.
fn relax(p: &mut SdpProblem) -> usize {
    let s = p.add_var();
    p.relax_blocks(s);
    p.add_nonneg(vec![(s, 1.0)], 1.0);
    p.minimize(s, 1.0);
    s
}
