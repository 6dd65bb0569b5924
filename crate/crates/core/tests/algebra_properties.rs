mod common;

use common::*;
use nclab::algebra::{
    coproduct_norm_estimate, coproduct_order_interval_constant, pushout_membership, quotient_norm, CcpMapSpec, CoproductSpec,
    PushoutSpec, QuotientSpec,
};
use nclab::conic::ConicSolver;
use nclab::duality::{Functional, QuasistateBody};
use nclab::linalg::{self, diag_real, CMatrix};
use nclab::{is_positive, op_norm, rng, OperatorSystemSpec};
use proptest::prelude::*;
use rayon::prelude::*;

fn average_map() -> CcpMapSpec {
    CcpMapSpec::from_matrix_map(&d2(), &full(1), |m| CMatrix::from_element(1, 1, (m[(0, 0)] + m[(1, 1)]) * 0.5)).unwrap()
}

fn trace_map() -> CcpMapSpec {
    CcpMapSpec::from_matrix_map(&full(2), &full(1), |m| CMatrix::from_element(1, 1, linalg::trace(m) * 0.5)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotient_norm_axioms(seed in any::<u64>(), which in 0usize..2, n in 1usize..=2, k in 1usize..=2) {
        let map = if which == 0 { average_map() } else { trace_map() };
        let q = QuotientSpec::of(&map);
        let s = &map.source;
        let solver = ConicSolver::default();
        let mut g = rng::stream(seed, "tests", "quotient", 0);
        let x = random_element(s, n, &mut g);
        let y = random_element(s, k, &mut g);
        let qx = quotient_norm(&q, &x, &solver).unwrap();
        let qy = quotient_norm(&q, &y, &solver).unwrap();
        prop_assert!(qx <= op_norm(&x) + 1e-9);
        let qs = quotient_norm(&q, &x.direct_sum(&y), &solver).unwrap();
        prop_assert!((qs - qx.max(qy)).abs() <= 1e-6 * qs.max(1.0), "{qs} vs max({qx}, {qy})");
        let zero = s.zero(n);
        prop_assert!(quotient_norm(&q, &zero, &solver).unwrap() <= 1e-9);
    }

    #[test]
    fn coproduct_cone_is_componentwise(seed in any::<u64>(), n in 1usize..=2, px in any::<bool>(), py in any::<bool>()) {
        let s = d2();
        let t = full(2);
        let cp = CoproductSpec::new(&s, &t);
        let mut g = rng::stream(seed, "tests", "coproduct_cone", 0);
        let make = |spec: &OperatorSystemSpec, positive: bool, g: &mut rng::Rng| {
            let x = random_selfadjoint(spec, n, g);
            if positive {
                let shift = op_norm(&x) + 0.1;
                let e = spec.element_from_matrix(&linalg::identity(n * spec.ambient_dim()), n).unwrap();
                x.add(&e.scale(shift))
            } else {
                x
            }
        };
        let x = make(&s, px, &mut g);
        let y = make(&t, py, &mut g);
        let want = is_positive(&s, &x).unwrap().positive && is_positive(&t, &y).unwrap().positive;
        prop_assert_eq!(cp.is_positive(&x, Some(&y)).unwrap(), want);
    }
}

/// Kernel elements of the averaging map have zero quotient norm.
#[test]
fn kernel_cosets_vanish() {
    let map = average_map();
    let q = QuotientSpec::of(&map);
    let solver = ConicSolver::default();
    for t in [0.5, -2.0, 10.0] {
        let j = map.source.element_from_matrix(&diag_real(&[t, -t]), 1).unwrap();
        assert!(quotient_norm(&q, &j, &solver).unwrap() <= 1e-7);
    }
}

#[test]
fn coproduct_with_zero_reproduces_norms() {
    let solver = ConicSolver::default();
    for s in [interval3(), d2()] {
        let cp = CoproductSpec::with_zero_system(&s);
        let bad: Vec<String> = (0..100u64)
            .into_par_iter()
            .filter_map(|i| {
                let mut g = stream(&format!("zero/{}", s.name()), i);
                let x = random_element(&s, 1, &mut g);
                let r = coproduct_norm_estimate(&cp, &x, None, 2, &solver).unwrap();
                let want = op_norm(&x);
                ((r.value - want).abs() > 1e-6 * want.max(1.0)).then(|| format!("{} sample {i}: {} vs {want}", s.name(), r.value))
            })
            .collect();
        assert!(bad.is_empty(), "{bad:?}");
    }
}

#[test]
fn coproduct_constant_is_bounded_by_the_factors() {
    let solver = ConicSolver::default();
    for (s, t) in [(interval3(), interval3()), (d2(), full(2))] {
        let cp = CoproductSpec::new(&s, &t);
        let (c, cs, ct) = coproduct_order_interval_constant(&cp, 1, 6, &solver).unwrap();
        assert!(c <= cs.max(ct) + 1e-9);
        assert!(c.is_finite());
    }
}

#[test]
fn pushout_members_satisfy_the_fiber_constraint() {
    let solver = ConicSolver::default();
    let map = average_map();
    let c = map.target.clone();
    let po = PushoutSpec::new(&map, &map).unwrap();
    let body = QuasistateBody::new(&c, 1);
    for i in 0..30 {
        let mut g = stream("pushout", i);
        let f = body.sample(&c, &solver, &mut g, 2).unwrap();
        assert!(pushout_membership(&po, &f, &f, &solver).unwrap(), "sample {i}");
        let other = f.scale(0.5);
        let differs = f.values().iter().any(|v| v.camax() > 1e-6);
        if differs {
            assert!(!pushout_membership(&po, &f, &other, &solver).unwrap(), "sample {i}");
        }
    }
    let zero = PushoutSpec::over_zero(&c, &c);
    let f = Functional::zero(&c, 1);
    assert!(pushout_membership(&zero, &f, &f, &solver).unwrap());
}
