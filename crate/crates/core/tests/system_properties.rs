mod common;

use common::*;
use nclab::linalg::{self, kron, CMatrix};
use nclab::{is_positive, op_norm, project_to_system, rng, OperatorSystemSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn specs() -> Vec<OperatorSystemSpec> {
    vec![full(2), off_diagonal(), interval3(), d2()]
}

/// Positive elements of `S` at level 1 used as building blocks.
fn positive_blocks(s: &OperatorSystemSpec) -> Vec<CMatrix> {
    s.basis().iter().filter(|b| linalg::is_hermitian(b, 1e-12) && linalg::min_eig(b) >= 0.0).cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cone_is_proper(seed in any::<u64>(), n in 1usize..=3, which in 0usize..4, tiny in any::<bool>()) {
        let s = &specs()[which];
        let mut g = rng::stream(seed, "tests", "proper", 0);
        let mut x = random_selfadjoint(s, n, &mut g);
        if tiny {
            x = x.scale(1e-12);
        }
        let neg = x.scale(-1.0);
        if is_positive(s, &x).unwrap().positive && is_positive(s, &neg).unwrap().positive {
            prop_assert!(op_norm(&x) <= 10.0 * s.tolerances().eig_tol);
        }
        let z = s.zero(n);
        prop_assert!(is_positive(s, &z).unwrap().positive);
    }

    #[test]
    fn compressions_stay_positive(seed in any::<u64>(), n in 1usize..=3, m_off in 0usize..3, which in 0usize..4) {
        let s = &specs()[which];
        let blocks = positive_blocks(s);
        prop_assume!(!blocks.is_empty());
        let mut g = rng::stream(seed, "tests", "compress", 0);
        let d = s.ambient_dim();
        let mut m = CMatrix::zeros(n * d, n * d);
        for b in &blocks {
            let a = rng::complex_gaussian(&mut g, n, n);
            m += kron(&(&a * a.adjoint()), b);
        }
        let (x, residual) = project_to_system(s, &m, n).unwrap();
        prop_assert!(residual < 1e-9);
        prop_assert!(is_positive(s, &x).unwrap().positive);
        let k = n - m_off.min(n - 1);
        let v = rng::isometry(&mut g, n, k);
        let c = x.compress(s, &v);
        prop_assert_eq!(c.level(), k);
        let scale = op_norm(&x).max(1.0);
        prop_assert!(linalg::min_eig(c.realization()) >= -s.tolerances().eig_tol * scale);
    }

    #[test]
    fn norm_axioms(seed in any::<u64>(), n in 1usize..=2, k in 1usize..=2, which in 0usize..4, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let s = &specs()[which];
        let mut g = rng::stream(seed, "tests", "norm", 0);
        let x = random_element(s, n, &mut g);
        let y = random_element(s, k, &mut g);
        let sum = x.direct_sum(&y);
        let want = op_norm(&x).max(op_norm(&y));
        prop_assert!((op_norm(&sum) - want).abs() <= 1e-10 * want.max(1.0));
        let a = Complex64::new(re, im);
        let scaled = x.scale_complex(a);
        prop_assert!((op_norm(&scaled) - a.norm() * op_norm(&x)).abs() <= 1e-10 * op_norm(&x).max(1.0));
        let t = x.add(&x.scale(2.0));
        prop_assert!(op_norm(&t) <= 3.0 * op_norm(&x) * (1.0 + 1e-12));
    }
}

#[test]
fn projection_is_idempotent_and_nonexpansive() {
    for s in specs() {
        let d = s.ambient_dim();
        for i in 0..100 {
            let mut g = stream(&format!("project/{}", s.name()), i);
            let n = 1 + (i as usize % 3);
            let a = rng::complex_gaussian(&mut g, n * d, n * d);
            let b = rng::complex_gaussian(&mut g, n * d, n * d);
            let (pa, _) = project_to_system(&s, &a, n).unwrap();
            let (pb, _) = project_to_system(&s, &b, n).unwrap();
            let (ppa, r) = project_to_system(&s, pa.realization(), n).unwrap();
            assert!(r < 1e-10, "{}: residual {r}", s.name());
            assert!((ppa.realization() - pa.realization()).norm() < 1e-10);
            let gap = (pa.realization() - pb.realization()).norm();
            assert!(gap <= (&a - &b).norm() * (1.0 + 1e-12), "{}: expansion", s.name());
        }
    }
}

#[test]
fn amplification_preserves_norm_and_positivity() {
    let s = full(2);
    let mut g = stream("amplify", 0);
    let x = random_selfadjoint(&s, 2, &mut g);
    let a = x.amplify(2);
    assert_eq!(a.level(), 4);
    assert!((op_norm(&a) - op_norm(&x)).abs() < 1e-12);
    let p = x.add(&x.scale(-1.0));
    assert!(is_positive(&s, &p.amplify(3)).unwrap().positive);
}
