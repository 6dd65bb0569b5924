mod common;

use common::*;
use nclab::algebra::CcpMapSpec;
use nclab::conic::ConicSolver;
use nclab::decomp::exact_alpha;
use nclab::duality::{dualizability_verdict, exact_beta, is_quasistate, QuasistateBody, Verdict, VerdictOptions};
use nclab::linalg::{self, diag_real, CMatrix};
use nclab::{build_system, op_norm, rng, Error, OperatorSystemSpec};
use proptest::prelude::*;
use rayon::prelude::*;

#[test]
fn quasistates_are_closed_under_midpoints_and_scaling() {
    let solver = ConicSolver::default();
    for s in [interval3(), d2()] {
        let body = QuasistateBody::new(&s, 1);
        let bad: Vec<u64> = (0..200u64)
            .into_par_iter()
            .filter(|&i| {
                let mut g = stream(&format!("closure/{}", s.name()), i);
                let f = body.sample(&s, &solver, &mut g, 2).unwrap();
                let h = body.sample(&s, &solver, &mut g, 2).unwrap();
                let t = rng::uniform(&mut g);
                let ok = |x: &nclab::duality::Functional| is_quasistate(&s, x, &solver).unwrap().accepted;
                !(ok(&f) && ok(&f.add(&h).scale(0.5)) && ok(&f.scale(t)))
            })
            .collect();
        assert!(bad.is_empty(), "{}: {bad:?}", s.name());
    }
}

#[test]
fn quasistates_are_contractive_on_the_pairing() {
    let solver = ConicSolver::default();
    let s = full(2);
    for k in 1..=2 {
        let body = QuasistateBody::new(&s, k);
        for i in 0..20 {
            let mut g = stream(&format!("pairing/{k}"), i);
            let f = body.sample(&s, &solver, &mut g, 3).unwrap();
            assert!(is_quasistate(&s, &f, &solver).unwrap().accepted);
            for p in 1..=2 {
                let a = random_element(&s, p, &mut g);
                let a = a.scale(1.0 / op_norm(&a));
                let pairing = f.pair(&a);
                assert!(linalg::spectral_norm(&pairing) <= 1.0 + 1e-6, "level {k} sample {i}");
            }
        }
    }
}

fn diagonal_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(d, m)| {
        prop::collection::vec(prop::collection::vec((-2i32..=2).prop_map(f64::from), d), 1..=m.min(d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generation_and_normality_bound_each_other(diagonals in diagonal_strategy(), level in 1usize..=2) {
        let basis: Vec<CMatrix> = diagonals.iter().map(|d| diag_real(d)).collect();
        let s = match build_system("random diagonal", basis, tol(2)) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let alpha = match exact_alpha(&s, level) {
            Ok(a) => a.0,
            Err(Error::ExactUnavailable(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let beta = match exact_beta(&s, level) {
            Ok(b) => b,
            Err(Error::ExactUnavailable(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        prop_assert!(beta <= 2.0 * alpha + 1e-9, "{diagonals:?} level {level}: α = {alpha}, β = {beta}");
        prop_assert!(alpha <= 2.0 * beta + 1e-9, "{diagonals:?} level {level}: α = {alpha}, β = {beta}");
    }

    #[test]
    fn full_matrix_order_is_one_normal(seed in any::<u64>(), n in 1usize..=4) {
        let mut g = rng::stream(seed, "tests", "normal", 0);
        let a = rng::complex_gaussian(&mut g, n, n);
        let b = rng::complex_gaussian(&mut g, n, n);
        let x = &a * a.adjoint();
        let y = &x + &b * b.adjoint();
        prop_assert!(linalg::spectral_norm(&x) <= linalg::spectral_norm(&y) + 1e-9);
    }
}

fn verdict(s: &OperatorSystemSpec) -> Verdict {
    dualizability_verdict(s, VerdictOptions { levels: 2, samples: 4 }, &ConicSolver::default()).unwrap().verdict
}

#[test]
fn quotients_of_dualizable_systems_are_not_certified_negative() {
    let wide = diagonal("diagonal_interval(5,-1,1)", &[&[-1.0, -0.5, 0.0, 0.5, 1.0]]);
    let narrow = interval3();
    let restrict = CcpMapSpec::new(&wide, &narrow, vec![narrow.element_from_matrix(&diag_real(&[0.0, 0.5, 1.0]), 1).unwrap()]).unwrap();
    let c = full(1);
    let average = CcpMapSpec::from_matrix_map(&d2(), &c, |m| CMatrix::from_element(1, 1, (m[(0, 0)] + m[(1, 1)]) * 0.5)).unwrap();
    let trace = CcpMapSpec::from_matrix_map(&full(2), &c, |m| CMatrix::from_element(1, 1, linalg::trace(m) * 0.5)).unwrap();
    for map in [restrict, average, trace] {
        let (vs, vt) = (verdict(&map.source), verdict(&map.target));
        assert!(
            !(vs == Verdict::DualizableEvidence && vt == Verdict::NotDualizableCertified),
            "{} → {}: {vs:?} but {vt:?}",
            map.source.name(),
            map.target.name()
        );
    }
    assert_eq!(verdict(&off_diagonal()), Verdict::NotDualizableCertified);
    assert_eq!(verdict(&full(2)), Verdict::DualizableEvidence);
}
