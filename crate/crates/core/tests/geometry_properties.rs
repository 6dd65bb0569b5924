mod common;

use common::*;
use nclab::conic::{ConicSolver, ConvexBodyExpr};
use nclab::geometry::{
    dual_norm_sandwich, extension_constant, reciprocal_pair, sample_body, separate_point, width, NcBodyFamily,
};
use nclab::linalg::{self, RMatrix, RVector};
use nclab::rng;
use proptest::prelude::*;
use rayon::prelude::*;

#[test]
fn sandwich_holds_at_level_three() {
    let solver = ConicSolver::default();
    let tol = 10.0 * solver.bisect_tol;
    let bodies = [NcBodyFamily::interval(0.0, 1.0, 3), NcBodyFamily::interval(-0.5, 2.0, 3), NcBodyFamily::psd_ball(1, 3)];
    let bad: Vec<String> = (0..bodies.len() * 30)
        .into_par_iter()
        .filter_map(|j| {
            let (b, i) = (j / 30, j % 30);
            let mut g = stream(&format!("sandwich/{b}"), i as u64);
            let d = rng::unit_sphere(&mut g, 9);
            let (lo, hull) = dual_norm_sandwich(&bodies[b], &d, 3, &solver).unwrap();
            (lo > hull + tol || hull > 2.0 * lo + tol).then(|| format!("body {b} sample {i}: ({lo}, {hull})"))
        })
        .collect();
    assert!(bad.is_empty(), "{bad:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reciprocal_pairs_are_exact(x in 1e-6f64..1e6) {
        let (c, r) = reciprocal_pair(x);
        prop_assert_eq!(c * r, 1.0);
        prop_assert!((c - x).abs() <= 64.0 * f64::EPSILON * x);
    }

    #[test]
    fn extension_estimates_are_reciprocal(b in 0.2f64..2.0, lo in 0.0f64..2.0, hi in 0.0f64..2.0) {
        let solver = ConicSolver::default();
        let l = NcBodyFamily::interval(0.0, b, 1);
        let k = NcBodyFamily::interval(-lo, b + hi, 1);
        let r = extension_constant(&l, &k, 1, 6, 1, &solver).unwrap();
        prop_assert_eq!(r.c_hat * r.c_small, 1.0);
        let want = (b + lo + hi) / b;
        prop_assert!((r.c_hat - want).abs() <= 1e-6 * want);
    }
}

#[test]
fn separation_certificates_revalidate() {
    let solver = ConicSolver::default();
    let families = [NcBodyFamily::psd_ball(2, 1), NcBodyFamily::interval(0.0, 1.0, 2)];
    for (f, k) in families.iter().enumerate() {
        let level = if f == 0 { 1 } else { 2 };
        let body = k.body(level).unwrap();
        let dim = body.dim().unwrap();
        let fresh = sample_body(&body, 1000, 60, (99, "fresh"), &solver).unwrap();
        for i in 0..5 {
            let mut g = stream(&format!("separate/{f}"), i);
            let x = rng::unit_sphere(&mut g, dim).scale(3.0);
            let cert = separate_point(k, &x, level, 50, i, &solver).unwrap().expect("point outside");
            assert!(cert.value >= 1.0 + cert.margin - 1e-12 && cert.margin > 0.0);
            let worst = fresh.iter().map(|p| cert.evaluate(p)).fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= 1.0 + solver.feas_tol, "family {f}: {worst}");
        }
        let inside = fresh[0].clone();
        assert!(separate_point(k, &inside, level, 10, 0, &solver).unwrap().is_none());
    }
}

#[test]
fn width_is_positive_exactly_on_the_span() {
    let solver = ConicSolver::default();
    let space = ConvexBodyExpr::system_sa(&d2(), 1);
    let fam = NcBodyFamily::custom("diagonal psd ball", 1, move |_| {
        Ok(ConvexBodyExpr::Intersection(vec![
            ConvexBodyExpr::PsdCone { n: 2 },
            ConvexBodyExpr::NormBall { n: 2, radius: 1.0 },
            space.clone(),
        ]))
    });
    let span = RMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    for i in 0..50 {
        let mut g = stream("width", i);
        let mut d = rng::unit_sphere(&mut g, 4);
        if i % 2 == 0 {
            d[2] = 0.0;
            d[3] = 0.0;
        }
        let mut cols: Vec<RVector> = span.column_iter().map(|c| c.into_owned()).collect();
        cols.push(d.clone());
        let in_span = linalg::rank(&RMatrix::from_columns(&cols), 1e-9) == 2;
        let w = width(&fam, &d, 1, &solver).unwrap();
        assert_eq!(w > 0.0, in_span, "sample {i}: width {w}");
    }
}
