mod common;

use common::*;
use nclab::conic::project::{dykstra, project, DykstraOptions};
use nclab::conic::{ConicSolver, ConvexBodyExpr, FeasibilityStatus};
use nclab::linalg::{hvec, RVector};
use nclab::rng;
use proptest::prelude::*;

/// Bodies containing the origin, with their dimension.
fn gauge_bodies() -> Vec<ConvexBodyExpr> {
    let m2 = full(2);
    vec![
        ConvexBodyExpr::NormBall { n: 2, radius: 1.0 },
        ConvexBodyExpr::matrix_interval(2, -1.0, 2.0),
        ConvexBodyExpr::cone_cap_ball(&m2, 1, 1.0).symmetric_hull(),
        ConvexBodyExpr::cone_cap_ball(&m2, 1, 1.0).difference_body(),
    ]
}

#[test]
fn gauge_is_positively_homogeneous() {
    let solver = ConicSolver::default();
    let tol = 10.0 * solver.bisect_tol;
    for (b, body) in gauge_bodies().iter().enumerate() {
        for i in 0..50 {
            let mut g = stream(&format!("homogeneity/{b}"), i);
            let x = rng::unit_sphere(&mut g, 4);
            let t = 4.0 * rng::uniform(&mut g).max(1e-3);
            let gx = solver.gauge(body, &x).unwrap().value;
            let gtx = solver.gauge(body, &x.scale(t)).unwrap().value;
            assert!((gtx - t * gx).abs() <= tol * t.max(1.0) * gx.max(1.0), "body {b}: {gtx} vs {t}·{gx}");
        }
    }
}

#[test]
fn boundary_points_have_unit_gauge() {
    let solver = ConicSolver::default();
    let tol = 10.0 * solver.bisect_tol;
    for (b, body) in gauge_bodies().iter().enumerate() {
        for i in 0..20 {
            let mut g = stream(&format!("boundary/{b}"), i);
            let x = rng::unit_sphere(&mut g, 4);
            let gx = solver.gauge(body, &x).unwrap().value;
            let edge = x.unscale(gx);
            let inner = edge.scale(1.0 - 1e-6);
            assert!(solver.contains(body, &inner).unwrap().0, "body {b}: boundary point not in the body");
            let ge = solver.gauge(body, &edge).unwrap().value;
            assert!((ge - 1.0).abs() <= tol, "body {b}: gauge {ge}");
        }
    }
}

fn projection_bodies() -> Vec<ConvexBodyExpr> {
    let m2 = full(2);
    vec![
        ConvexBodyExpr::PsdCone { n: 2 },
        ConvexBodyExpr::NormBall { n: 2, radius: 0.5 },
        ConvexBodyExpr::cone_cap_ball(&m2, 1, 1.0),
        ConvexBodyExpr::system_sa(&d2(), 1),
        ConvexBodyExpr::Intersection(vec![ConvexBodyExpr::PsdCone { n: 2 }, ConvexBodyExpr::system_sa(&d2(), 1)]),
        ConvexBodyExpr::NormBall { n: 2, radius: 1.0 }.translate(hvec(&nclab::linalg::diag_real(&[0.5, 0.0]))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), which in 0usize..6, scale in 0.1f64..5.0) {
        let solver = ConicSolver::default();
        let body = &projection_bodies()[which];
        let mut g = rng::stream(seed, "tests", "idempotent", 0);
        let x = rng::gaussian_vector(&mut g, 4).scale(scale);
        let (p, _) = solver.project_body(body, &x).unwrap();
        let (pp, _) = solver.project_body(body, &p).unwrap();
        prop_assert!((&pp - &p).norm() <= solver.feas_tol.max(1e-8) * 10.0);
    }

    #[test]
    fn translates_of_a_ball_meet(seed in any::<u64>(), r in 0.0f64..0.5) {
        let solver = ConicSolver::default();
        let mut g = rng::stream(seed, "tests", "translate", 0);
        let v = rng::unit_sphere(&mut g, 4).scale(r);
        let ball = ConvexBodyExpr::NormBall { n: 2, radius: 1.0 };
        let shifted = ball.clone().translate(v.clone());
        prop_assert!(solver.contains(&ball, &v.scale(0.5)).unwrap().0);
        prop_assert!(solver.contains(&shifted, &v.scale(0.5)).unwrap().0);
        let st = solver.check_feasible(&[ball, shifted]).unwrap();
        prop_assert_eq!(st.status, FeasibilityStatus::Feasible);
    }
}

/// Largest distance from `x` to any of the bodies.
fn gap(bodies: &[&ConvexBodyExpr], x: &RVector, opts: &DykstraOptions) -> f64 {
    bodies.iter().map(|b| (x - project(b, x, opts).unwrap().0).norm()).fold(0.0, f64::max)
}

#[test]
fn dykstra_gap_does_not_grow() {
    let m2 = full(2);
    let psd = ConvexBodyExpr::PsdCone { n: 2 };
    let ball = ConvexBodyExpr::NormBall { n: 2, radius: 1.0 };
    let diag = ConvexBodyExpr::system_sa(&d2(), 1);
    let cap = ConvexBodyExpr::cone_cap_ball(&m2, 1, 0.5);
    let runs: Vec<(Vec<&ConvexBodyExpr>, RVector)> = vec![
        (vec![&psd, &ball, &diag], RVector::from_vec(vec![3.0, -2.0, 1.0, 0.5])),
        (vec![&psd, &ball], RVector::from_vec(vec![-1.0, 2.0, 2.0, -1.0])),
        (vec![&cap, &diag], RVector::from_vec(vec![1.0, 1.0, 1.0, 1.0])),
    ];
    for (r, (bodies, x0)) in runs.iter().enumerate() {
        let mut last = f64::INFINITY;
        for sweeps in 1..=30 {
            let opts = DykstraOptions { feas_tol: 1e-14, max_sweeps: sweeps, stall_window: 1000 };
            let (x, _) = dykstra(bodies, x0, &opts).unwrap();
            let d = gap(bodies, &x, &opts);
            assert!(d <= last + 1e-12, "run {r}: gap rose from {last} to {d} at sweep {sweeps}");
            last = d;
        }
        let (_, st) = dykstra(bodies, x0, &DykstraOptions::default()).unwrap();
        assert_eq!(st.status, FeasibilityStatus::Feasible, "run {r}");
    }
}
