//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! wall time; the target fails if any criterion fails or runs past 60 s.

use nclab::algebra::{coproduct_norm_estimate, quotient_constant_estimate, quotient_norm, quotient_primal_estimate, CoproductSpec, QuotientSpec};
use nclab::conic::project::{dykstra, project, project_ball, project_psd, DykstraOptions};
use nclab::conic::{ConicSolver, ConvexBodyExpr, FeasibilityStatus, SubspaceData};
use nclab::decomp::{
    alpha_estimate, decompose, dominate_lambda, exact_alpha, order_unit, positive_generation_check, AlphaMode,
};
use nclab::duality::{
    dualizability_verdict, exact_beta, is_cp_functional, is_quasistate, normality_estimate, Functional, QuasistateBody,
    Verdict, VerdictOptions,
};
use nclab::geometry::{dual_norm_sandwich, extension_constant, order_embedding_check, NcBodyFamily};
use nclab::linalg::{self, diag_real, hmat, hvec, identity, unit, CMatrix, RMatrix, RVector};
use nclab::polytope::Polyhedron;
use nclab::{build_system, rng, Error, LevelElement, OperatorSystemSpec, ToleranceConfig};
use nclab_cli::{corpus, run_command, Flags};
use rayon::prelude::*;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

const BUDGET: Duration = Duration::from_secs(60);

fn solver() -> ConicSolver {
    ConicSolver::default()
}

fn with_cap(spec: OperatorSystemSpec, cap: usize) -> OperatorSystemSpec {
    let tol = ToleranceConfig { level_cap: cap, ..spec.tolerances().clone() };
    spec.with_tolerances(tol)
}

fn full2() -> OperatorSystemSpec {
    with_cap(corpus::full_matrix(2).build().unwrap(), 3)
}

fn off2() -> OperatorSystemSpec {
    with_cap(corpus::off_diagonal(2).build().unwrap(), 3)
}

fn interval3() -> OperatorSystemSpec {
    with_cap(corpus::diagonal_interval(3, 0.0, 1.0).build().unwrap(), 3)
}

fn scalar(x: f64) -> RVector {
    RVector::from_element(1, x)
}

fn close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol:e})");
}

fn ac1_non_dualizable() {
    let s = off2();
    let sv = solver();
    let pg = positive_generation_check(&s, 1, &sv).unwrap();
    assert!(!pg.pass);
    assert_eq!(pg.rank, 0);
    let x = s.element_from_matrix(&(unit(2, 0, 1) + unit(2, 1, 0)), 1).unwrap();
    assert!(matches!(decompose(&s, &x, &sv), Err(Error::Infeasible(_))));
    let v = dualizability_verdict(&s, VerdictOptions { levels: 1, samples: 4 }, &sv).unwrap();
    assert_eq!(v.verdict, Verdict::NotDualizableCertified);
    let w = v.vanishing_functional.expect("witness functional");
    let size: f64 = w.iter().flatten().map(|z| z[0].hypot(z[1])).sum();
    assert!(size > 0.5, "witness is nonzero");
}

/// Dense search over Hermitian `y = [[a, c], [c̄, b]]` with `y ⪰ 0`,
/// `y − x ⪰ 0`, then a shrinking pattern search around the best point.
fn brute_force_decomposition(x: [f64; 2]) -> f64 {
    let psd = |a: f64, b: f64, re: f64, im: f64| a >= -1e-12 && b >= -1e-12 && a * b - re * re - im * im >= -1e-12;
    let norm = |a: f64, b: f64, re: f64, im: f64| 0.5 * (a + b).abs() + (0.25 * (a - b).powi(2) + re * re + im * im).sqrt();
    let objective = |p: [f64; 4]| -> Option<f64> {
        let [a, b, re, im] = p;
        let (za, zb) = (a - x[0], b - x[1]);
        (psd(a, b, re, im) && psd(za, zb, re, im)).then(|| norm(a, b, re, im) + norm(za, zb, re, im))
    };
    let axis = |k: usize, lo: f64| lo + 0.1 * k as f64;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for i in 0..=30 {
        for j in 0..=30 {
            for k in 0..=30 {
                for l in 0..=30 {
                    let p = [axis(i, 0.0), axis(j, 0.0), axis(k, -1.5), axis(l, -1.5)];
                    if let Some(v) = objective(p) {
                        if v < best.0 {
                            best = (v, p);
                        }
                    }
                }
            }
        }
    }
    let mut step = 0.05;
    while step > 1e-9 {
        let mut moved = false;
        for c in 0..4 {
            for s in [-1.0, 1.0] {
                let mut p = best.1;
                p[c] += s * step;
                if let Some(v) = objective(p) {
                    if v < best.0 - 1e-15 {
                        best = (v, p);
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.0
}

fn ac2_decomposition_value() {
    let oracle = brute_force_decomposition([1.0, -1.0]);
    close(oracle, 2.0, 1e-6, "brute-force oracle");
    let s = full2();
    let x = s.element_from_matrix(&diag_real(&[1.0, -1.0]), 1).unwrap();
    let d = decompose(&s, &x, &solver()).unwrap();
    close(d.value, oracle, 1e-6, "decompose vs oracle");
    assert!(d.residual < 1e-6 && d.min_eig_y > -1e-8 && d.min_eig_z > -1e-8);
}

fn ac3_coproduct_norms() {
    let (sf, tf) = corpus::coproduct_interval_pair();
    let s = sf.build().unwrap();
    let t = tf.build().unwrap();
    let cp = CoproductSpec::new(&s, &t).with_k_max(2);
    let a = s.element_from_matrix(&s.basis()[0], 1).unwrap();
    let b = t.element_from_matrix(&t.basis()[0], 1).unwrap();
    let sv = solver();
    let sum = coproduct_norm_estimate(&cp, &a, Some(&b), 3, &sv).unwrap();
    assert!(sum.value >= 2.0 - 1e-6 && sum.value <= 2.0, "‖a ⊕ a‖ = {}", sum.value);
    let diff = coproduct_norm_estimate(&cp, &a, Some(&b.scale(-1.0)), 3, &sv).unwrap();
    close(diff.value, 1.0, 1e-6, "‖a ⊕ (−a)‖");
    for (k, v) in &diff.samples {
        assert!(*v <= 1.0 + 1e-6, "sample at k={k} exceeds 1: {v}");
    }
}

fn ac4_sandwich() {
    let sv = solver();
    let bodies =
        [NcBodyFamily::interval(0.0, 1.0, 2), NcBodyFamily::psd_ball(2, 2), NcBodyFamily::quasistate(&with_cap(interval3(), 2))];
    let jobs: Vec<(usize, usize, u64)> =
        (0..bodies.len()).flat_map(|b| (1..=2).flat_map(move |n| (0..100).map(move |i| (b, n, i)))).collect();
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(b, n, i)| {
            let k = &bodies[b];
            let dim = k.dim(n).unwrap();
            let d = rng::unit_sphere(&mut rng::stream(7, "acceptance", &format!("sandwich/{b}/{n}"), i), dim);
            let (lo, hull) = dual_norm_sandwich(k, &d, n, &sv).unwrap();
            let ok = lo <= hull + 1e-5 && hull <= 2.0 * lo + 1e-5;
            (!ok).then(|| format!("body {b} level {n} sample {i}: ({lo}, {hull})"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
    let (lo, hull) = dual_norm_sandwich(&NcBodyFamily::psd_ball(2, 1), &hvec(&diag_real(&[1.0, -1.0])), 1, &sv).unwrap();
    close(lo, 1.0, 1e-6, "g_lo");
    close(hull, 2.0, 1e-6, "g_hull");
}

fn ac5_extension_constants() {
    let sv = solver();
    let l = NcBodyFamily::interval(0.0, 1.0, 1);
    let k = NcBodyFamily::interval(-1.0, 1.0, 1);
    let r = extension_constant(&l, &k, 1, 20, 0, &sv).unwrap();
    close(r.c_hat, 2.0, 1e-6, "Ĉ");
    assert_eq!(r.c_hat * r.c_small, 1.0, "reciprocity");
    let oe = order_embedding_check(&l, &k, 1, 20, 0, &sv).unwrap();
    assert!(!oe.pass);
    let w = oe.witness.expect("witness");
    close(w[0], -1.0, 1e-6, "order-embedding witness");
}

fn diagonal_system(name: &str, diagonals: &[&[f64]]) -> OperatorSystemSpec {
    let basis = diagonals.iter().map(|d| diag_real(d)).collect();
    build_system(name, basis, ToleranceConfig { level_cap: 2, ..ToleranceConfig::default() }).unwrap()
}

fn ac6_generation_normality() {
    let systems = [
        diagonal_system("A[0,1]", &[&[0.0, 0.5, 1.0]]),
        diagonal_system("A[-1,1]", &[&[-1.0, 0.0, 1.0]]),
        diagonal_system("D2", &[&[1.0, 0.0], &[0.0, 1.0]]),
        diagonal_system("D3", &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
        diagonal_system("P", &[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]),
        diagonal_system("Q", &[&[1.0, -1.0, 0.0], &[0.0, 1.0, 1.0]]),
        diagonal_system("R", &[&[1.0, 2.0, 0.0], &[0.0, -1.0, 1.0], &[1.0, 0.0, 0.0]]),
    ];
    let mut checked = 0;
    for s in &systems {
        for n in 1..=2 {
            let (alpha, beta) = match (exact_alpha(s, n), exact_beta(s, n)) {
                (Ok(a), Ok(b)) => (a.0, b),
                (Err(Error::ExactUnavailable(_)), Err(Error::ExactUnavailable(_))) if n > 1 => continue,
                (a, b) => panic!("{} level {n}: {a:?} / {b:?}", s.name()),
            };
            assert!(beta <= 2.0 * alpha + 1e-9, "{} level {n}: β = {beta}, α = {alpha}", s.name());
            assert!(alpha <= 2.0 * beta + 1e-9, "{} level {n}: α = {alpha}, β = {beta}", s.name());
            checked += 1;
        }
    }
    assert!(checked >= systems.len() + 4, "only {checked} exact instances");
    let s = with_cap(full2(), 1);
    let sv = solver();
    close(alpha_estimate(&s, 1, 20, AlphaMode::Sampled, &sv).unwrap().alpha, 2.0, 1e-6, "α̂");
    close(normality_estimate(&s, 1, 8, &sv).unwrap().beta, 1.0, 1e-6, "β̂");
}

fn random_selfadjoint(s: &OperatorSystemSpec, n: usize, idx: u64) -> LevelElement {
    let mut g = rng::stream(11, "acceptance", &format!("{}/{n}", s.name()), idx);
    let coeffs: Vec<CMatrix> = (0..s.dim()).map(|_| rng::complex_gaussian(&mut g, n, n)).collect();
    let x = s.element_at(n, coeffs).unwrap();
    x.add(&x.adjoint(s)).scale(0.5)
}

fn ac7_order_unit() {
    let sv = solver();
    for s in [full2(), interval3()] {
        let u = order_unit(&s, &sv).unwrap();
        assert!(u.verified);
        for n in 1..=3 {
            for i in 0..100 {
                let x = random_selfadjoint(&s, n, i);
                let dom = dominate_lambda(&s, &x, &u).unwrap();
                assert!(dom.holds(1e-9), "{} level {n} sample {i}: {dom:?}", s.name());
            }
        }
    }
    let corpus_specs: Vec<OperatorSystemSpec> = corpus::CorpusId::all()
        .iter()
        .flat_map(|id| id.build())
        .flat_map(|input| match input {
            corpus::Input::Spec(f) => vec![f],
            corpus::Input::Map(m) => vec![m.source, m.target],
        })
        .map(|f| with_cap(f.build().unwrap(), 3))
        .collect();
    for s in &corpus_specs {
        if positive_generation_check(s, 1, &sv).unwrap().pass {
            for n in 2..=3 {
                assert!(positive_generation_check(s, n, &sv).unwrap().pass, "{} level {n}", s.name());
            }
        }
    }
}

/// `min max(|a|, |b|)` subject to `(a + b)/2 = 1`, by vertex enumeration.
fn quotient_constant_lp() -> f64 {
    let a = RMatrix::from_row_slice(4, 3, &[1.0, 0.0, -1.0, -1.0, 0.0, -1.0, 0.0, 1.0, -1.0, 0.0, -1.0, -1.0]);
    let eq = RMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.0]);
    let p = Polyhedron::new(a, RVector::zeros(4)).with_equalities(eq, scalar(1.0));
    p.minimize(&RVector::from_vec(vec![0.0, 0.0, 1.0]), 1e-12).expect("bounded LP").0
}

fn ac8_quotient_duality() {
    let sv = solver();
    let c = quotient_constant_lp();
    close(c, 1.0, 1e-12, "LP constant");
    let map = corpus::quotient_example().build().unwrap();
    let est = quotient_constant_estimate(&map, 1, 500, &sv).unwrap();
    for (name, v) in [("primal", est.c_primal), ("dual", est.c_dual)] {
        assert!(v <= c + 1e-9 && v >= 0.9 * c, "{name} estimate {v} against C = {c}");
    }
    let q = QuotientSpec::of(&map);
    let e11 = map.source.element_from_matrix(&unit(2, 0, 0), 1).unwrap();
    close(quotient_norm(&q, &e11, &sv).unwrap(), 0.5, 1e-6, "E11 coset");
    let restriction = corpus::restriction_pair().build().unwrap();
    close(quotient_primal_estimate(&restriction, 1, 20, &sv).unwrap(), 1.0, 1e-6, "restriction Ĉ_primal");
}

fn ac9_quasistates() {
    let s = full2();
    let sv = solver();
    let body = QuasistateBody::new(&s, 1);
    let failures: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut g = rng::stream(3, "acceptance", "closure", i);
            let f = body.sample(&s, &sv, &mut g, 2).unwrap();
            let h = body.sample(&s, &sv, &mut g, 2).unwrap();
            let t = rng::uniform(&mut g);
            let mid = f.add(&h).scale(0.5);
            let scaled = f.scale(t);
            let ok = is_quasistate(&s, &mid, &sv).unwrap().accepted && is_quasistate(&s, &scaled, &sv).unwrap().accepted;
            (!ok).then(|| format!("closure {i}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
    let transpose = Functional::from_map(&s, 2, |b| b.transpose()).unwrap();
    let r = is_cp_functional(&s, &transpose, &sv).unwrap();
    assert!(!r.accepted);
    close(r.margin, 1.0, 1e-6, "transpose Choi eigenvalue");
    assert!(is_quasistate(&s, &Functional::zero(&s, 1), &sv).unwrap().accepted);
    let trace = Functional::from_map(&s, 1, |b| CMatrix::from_element(1, 1, linalg::trace(b) * 0.5)).unwrap();
    assert!(is_quasistate(&s, &trace, &sv).unwrap().accepted);
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).camax()
}

fn ac10_solver_suite() {
    let psd = hmat(&project_psd(&hvec(&diag_real(&[1.0, -2.0])), 2), 2);
    assert!(max_diff(&psd, &diag_real(&[1.0, 0.0])) <= 1e-12);
    let flip = unit(2, 0, 1) + unit(2, 1, 0);
    let half = CMatrix::from_element(2, 2, linalg::re(0.5));
    assert!(max_diff(&hmat(&project_psd(&hvec(&flip), 2), 2), &half) <= 1e-12);
    let ball = hmat(&project_ball(&hvec(&diag_real(&[3.0, -0.5])), 2, 1.0), 2);
    assert!(max_diff(&ball, &diag_real(&[1.0, -0.5])) <= 1e-12);
    let d2 = diagonal_system("D2", &[&[1.0, 0.0], &[0.0, 1.0]]);
    let ones = CMatrix::from_element(2, 2, linalg::re(1.0));
    let (p, _) = project(&ConvexBodyExpr::system_sa(&d2, 1), &hvec(&ones), &DykstraOptions::default()).unwrap();
    assert!(max_diff(&hmat(&p, 2), &identity(2)) <= 1e-12);

    let opts = DykstraOptions { feas_tol: 1e-9, max_sweeps: 10_000, ..DykstraOptions::default() };
    let trace_one = ConvexBodyExpr::AffineSlice {
        map: RMatrix::from_row_slice(1, 4, &[1.0, 1.0, 0.0, 0.0]),
        offset: scalar(1.0),
    };
    let diag_space = Arc::new(SubspaceData::new("diag", RMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])));
    let instances: Vec<(Vec<ConvexBodyExpr>, RVector)> = vec![
        (
            vec![ConvexBodyExpr::PsdCone { n: 2 }, trace_one.clone()],
            hvec(&CMatrix::from_row_slice(2, 2, &[linalg::re(2.0), linalg::re(1.0), linalg::re(1.0), linalg::re(-1.0)])),
        ),
        (
            vec![ConvexBodyExpr::PsdCone { n: 2 }, ConvexBodyExpr::NormBall { n: 2, radius: 1.0 }, ConvexBodyExpr::SystemSa(diag_space)],
            hvec(&(diag_real(&[3.0, -2.0]) + flip.clone())),
        ),
        (vec![ConvexBodyExpr::cone_cap_ball(&full2(), 2, 1.0), trace_one_level2()], RVector::from_fn(16, |i, _| ((i * 7 % 5) as f64) - 2.0)),
    ];
    for (i, (bodies, x0)) in instances.iter().enumerate() {
        let refs: Vec<&ConvexBodyExpr> = bodies.iter().collect();
        let (x, st) = dykstra(&refs, x0, &opts).unwrap();
        assert_eq!(st.status, FeasibilityStatus::Feasible, "instance {i}");
        assert!(st.residual < 1e-8 && st.iterations <= 10_000, "instance {i}: {st:?}");
        for b in bodies {
            let (p, _) = project(b, &x, &opts).unwrap();
            assert!((&x - p).norm() < 1e-8, "instance {i}");
        }
    }

    let flags = Flags { levels: Some(2), samples: Some(6), seed: 5, no_cache: true, ..Flags::default() };
    let inputs = vec!["corpus:full_matrix(2)".to_string()];
    let run = |threads: usize, command: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_command(command, &inputs, &flags).unwrap().report.stable_view())
    };
    for command in ["alpha", "beta"] {
        assert_eq!(run(1, command), run(8, command), "{command} differs across thread counts");
    }
}

/// `{X ∈ H_4 : tr X = 1}` in [`hvec`] coordinates.
fn trace_one_level2() -> ConvexBodyExpr {
    let mut map = RMatrix::zeros(1, 16);
    for i in 0..4 {
        map[(0, i)] = 1.0;
    }
    ConvexBodyExpr::AffineSlice { map, offset: scalar(1.0) }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("AC1 non-dualizable witness", ac1_non_dualizable),
        ("AC2 decomposition value", ac2_decomposition_value),
        ("AC3 coproduct norms", ac3_coproduct_norms),
        ("AC4 sandwich suite", ac4_sandwich),
        ("AC5 extension constants", ac5_extension_constants),
        ("AC6 generation/normality duality", ac6_generation_normality),
        ("AC7 order-unit recipe", ac7_order_unit),
        ("AC8 quotient duality", ac8_quotient_duality),
        ("AC9 quasistate body", ac9_quasistates),
        ("AC10 solver suite", ac10_solver_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let verdict = match &result {
            Ok(()) if elapsed <= BUDGET => "PASS".to_string(),
            Ok(()) => format!("FAIL (over the {} s budget)", BUDGET.as_secs()),
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                format!("FAIL ({})", msg.unwrap_or_else(|| "panic".into()))
            }
        };
        if !verdict.starts_with("PASS") {
            failed += 1;
        }
        println!("{verdict:<4} {name} [{:.2} s]", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
