#![allow(dead_code)]

use nclab::linalg::{diag_real, unit, CMatrix};
use nclab::{build_system, rng, LevelElement, OperatorSystemSpec, ToleranceConfig};

pub fn tol(cap: usize) -> ToleranceConfig {
    ToleranceConfig { level_cap: cap, ..ToleranceConfig::default() }
}

pub fn full(d: usize) -> OperatorSystemSpec {
    let basis = (0..d).flat_map(|i| (0..d).map(move |j| unit(d, i, j))).collect();
    build_system(&format!("full_matrix({d})"), basis, tol(3)).unwrap()
}

pub fn off_diagonal() -> OperatorSystemSpec {
    build_system("off_diagonal(2)", vec![unit(2, 0, 1), unit(2, 1, 0)], tol(3)).unwrap()
}

pub fn diagonal(name: &str, diagonals: &[&[f64]]) -> OperatorSystemSpec {
    build_system(name, diagonals.iter().map(|d| diag_real(d)).collect(), tol(3)).unwrap()
}

/// `A([0, 1], 0)` sampled at three points.
pub fn interval3() -> OperatorSystemSpec {
    diagonal("diagonal_interval(3,0,1)", &[&[0.0, 0.5, 1.0]])
}

pub fn d2() -> OperatorSystemSpec {
    diagonal("diagonal(2)", &[&[1.0, 0.0], &[0.0, 1.0]])
}

pub fn random_element(s: &OperatorSystemSpec, n: usize, g: &mut rng::Rng) -> LevelElement {
    let coeffs: Vec<CMatrix> = (0..s.dim()).map(|_| rng::complex_gaussian(g, n, n)).collect();
    s.element_at(n, coeffs).unwrap()
}

pub fn random_selfadjoint(s: &OperatorSystemSpec, n: usize, g: &mut rng::Rng) -> LevelElement {
    let x = random_element(s, n, g);
    x.add(&x.adjoint(s)).scale(0.5)
}

pub fn stream(label: &str, i: u64) -> rng::Rng {
    rng::stream(42, "tests", label, i)
}
