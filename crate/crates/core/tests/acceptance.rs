//! Acceptance criteria A1–A9. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use common::random;
use common::transcription::transcription_value;
use spocb::duality::dual_integrand_terms;
use spocb::oracle::reference;
use spocb::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn f8() -> Problem {
    build_problem(&fixtures::f8_aircraft()).unwrap()
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn a1() -> Outcome {
    let r = build_reduced(&f8()).unwrap();
    let checks = [
        (r.cal_r[(0, 0)], 5.513834),
        (r.cal_q[(0, 0)], 1.009401),
        (r.cal_q[(0, 1)], 0.0),
        (r.cal_q[(1, 0)], 0.0),
        (r.cal_q[(1, 1)], 1.0),
        (r.cal_a[(0, 0)], -0.143614),
        (r.cal_a[(0, 1)], -0.676469),
        (r.cal_a[(1, 0)], 1.050984),
        (r.cal_a[(1, 1)], 0.0),
        (r.cal_b[(0, 0)], 1.375594),
        (r.cal_b[(1, 0)], -16.945030),
    ];
    let worst = checks.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(worst <= 1e-5, format!("max entry error {worst:.2e} (tol 1e-5)"))
}

fn a2() -> Outcome {
    let p = f8();
    let ld = block_diagonalize(&hamiltonian_fast_matrix(&p), p.n).unwrap();
    let mut re: Vec<f64> = ld.lambda_eigenvalues().iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ok = re.len() == 2 && close(re[0], 3.5244, 5e-4) && close(re[1], 0.6663, 5e-4);
    outcome(ok, format!("Λ spectrum {:.5}, {:.5} (tol 5e-4)", re[0], re[1]))
}

const REFERENCE_T: [[f64; 4]; 4] = [
    [-0.1184, 0.5421, -0.1824, -0.1176],
    [0.9515, -0.4073, -0.4093, -0.9369],
    [-0.1579, 0.7281, 0.8931, 0.2075],
    [0.2360, -0.1003, 0.0399, 0.2556],
];

fn a3() -> Outcome {
    let reference = DMatrix::from_fn(4, 4, |i, j| REFERENCE_T[i][j]);
    let c_ref = [3.5607, -0.7475];
    let c1_ref = [0.0765, -0.0544];
    let mut lines = Vec::new();
    let mut any = false;
    let mut t_ok_all = true;
    for horizon in [1.0, 5.0] {
        let p = f8().with_horizon(horizon).unwrap();
        let approx = zeroth_order(&p, &opts()).unwrap();
        let t = &approx.decomposition.t;
        // Per-column sign that best aligns with the reference matrix.
        let signs: Vec<f64> = (0..4)
            .map(|j| if t.column(j).dot(&reference.column(j)) >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let t_err = (0..4)
            .flat_map(|j| (0..4).map(move |i| (i, j)))
            .map(|(i, j)| (signs[j] * t[(i, j)] - reference[(i, j)]).abs())
            .fold(0.0, f64::max);
        let c = &approx.initial.constant;
        let c1 = &approx.fin.constant;
        let c_err = (0..2).map(|i| (signs[i] * c[i] - c_ref[i]).abs()).fold(0.0, f64::max);
        let c1_err = (0..2).map(|i| (signs[2 + i] * c1[i] - c1_ref[i]).abs()).fold(0.0, f64::max);
        let t_ok = t_err <= 5e-4;
        let ok = t_ok && c_err <= 5e-3 && c1_err <= 5e-3;
        t_ok_all &= t_ok;
        any |= ok;
        lines.push(format!(
            "horizon {horizon}: T err {t_err:.1e}, c = [{:.4}, {:.4}] err {c_err:.1e}, c1 = [{:.4}, {:.4}] err {c1_err:.1e} -> {}",
            signs[0] * c[0],
            signs[1] * c[1],
            signs[2] * c1[0],
            signs[3] * c1[1],
            if ok { "match" } else { "no match" }
        ));
    }
    outcome(any && t_ok_all, lines.join("; "))
}

fn a4() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.0336, 0.02, 0.01] {
        let p = f8().with_epsilon(eps).unwrap();
        let r = bounds_report(&p, &opts()).unwrap();
        let v = r.oracle.unwrap();
        let b = BoundsReport::brackets(r.lower, v, r.upper);
        ok &= b;
        parts.push(format!("ε={eps}: {:.6} ≤ {:.6} ≤ {:.6}", r.lower, v, r.upper));
    }
    outcome(ok, parts.join("; "))
}

fn a5() -> Outcome {
    let tol = 1e-5;
    let p = f8();
    let (v, _, traj) = reference(&p, &opts()).unwrap();
    let f8_gap = strong_duality_check(&p, &traj, v).unwrap();
    let mut rng = random::rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=3);
        let eps = rng.gen_range(0.05..1.0);
        let q: Problem = build_problem(&random::instance(&mut rng, m, n, k, eps)).unwrap();
        let (v, _, traj) = reference(&q, &opts()).unwrap();
        worst = worst.max(strong_duality_check(&q, &traj, v).unwrap());
    }
    outcome(
        f8_gap <= tol && worst <= tol,
        format!("F-8 gap {f8_gap:.2e}, worst of 20 random {worst:.2e} (tol {tol:.0e})"),
    )
}

fn a6() -> Outcome {
    let eps = [0.04, 0.02, 0.01, 0.005];
    let gaps: Vec<f64> = eps
        .iter()
        .map(|&e| bounds_report(&f8().with_epsilon(e).unwrap(), &opts().without_oracle()).unwrap().gap)
        .collect();
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let gaps_txt: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    outcome(
        (0.8..=1.25).contains(&slope),
        format!("slope {slope:.3} (window [0.8, 1.25]); gaps {}", gaps_txt.join(", ")),
    )
}

fn a7() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, cfg) in [("scalar-toy", fixtures::scalar_toy()), ("f8-aircraft", fixtures::f8_aircraft())] {
        let p: Problem = build_problem(&cfg).unwrap();
        let sol = solve_riccati_full(&p, &opts()).unwrap();
        let v = optimal_value(&sol, &p.z0);
        let (qp, _) = transcription_value(&p, 2000);
        let rel = (v - qp).abs() / qp.abs();
        ok &= rel <= 1e-4;
        parts.push(format!("{name}: Riccati {v:.8}, transcription {qp:.8}, rel {rel:.1e}"));
    }
    outcome(ok, parts.join("; "))
}

fn a8() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.25, 0.0125] {
        let p: Problem = build_problem(&fixtures::clustered_surrogate(eps)).unwrap();
        let r = bounds_report(&p, &opts()).unwrap();
        let v = r.oracle.unwrap();
        let b = BoundsReport::brackets(r.lower, v, r.upper);
        let blind = bounds_report(&p, &opts().without_oracle()).unwrap();
        let finite = blind.upper.is_finite() && blind.lower.is_finite() && blind.oracle.is_none();
        ok &= b && finite;
        parts.push(format!(
            "ε={eps}: {:.6} ≤ {:.6} ≤ {:.6}, no-oracle finite: {finite}",
            r.lower, v, r.upper
        ));
    }
    outcome(ok, parts.join("; "))
}

fn random_instance() -> impl Strategy<Value = (u64, usize, usize, usize, f64)> {
    (any::<u64>(), 1usize..=3, 1usize..=3, 1usize..=2, 0.02f64..0.5)
}

fn smooth(coef: Vec<DVector<f64>>) -> impl Fn(f64) -> DVector<f64> {
    move |t: f64| {
        coef.iter()
            .enumerate()
            .fold(DVector::zeros(coef[0].len()), |acc, (j, c)| acc + c * (j as f64 * 1.7 * t).cos())
    }
}

fn a9_case(seed: u64, m: usize, n: usize, k: usize, eps: f64) -> Result<(), TestCaseError> {
    let mut rng = random::rng(seed);
    let p: Problem = build_problem(&random::instance(&mut rng, m, n, k, eps)).unwrap();
    let d = m + n;
    let o = opts();

    // Weak duality on an arbitrary primal control and an arbitrary dual pair.
    let mut draw = |len: usize| DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0));
    let w = smooth((0..3).map(|_| draw(k)).collect());
    let rho = smooth((0..3).map(|_| draw(d)).collect());
    let gamma_end = draw(d);
    let (jp, _) = upper_bound(&p, &w, &o).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (jd, dt) = lower_bound(&p, &rho, &gamma_end, &o).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(jd <= jp + 1e-8 * (1.0 + jp.abs()), "weak duality: {} > {}", jd, jp);

    // Both running terms of the dual integrand are non-positive at every sample.
    for (g, r) in dt.gamma.iter().zip(&dt.rho) {
        let (a, b) = dual_integrand_terms(&p, g, r);
        prop_assert!(a <= 0.0 && b <= 0.0);
    }

    // Layer boundary condition and block-diagonalization residual.
    let approx = match zeroth_order(&p, &o) {
        Ok(a) => a,
        Err(e) if matches!(e.root(), Error::Nonsingularity { .. }) => {
            return Err(TestCaseError::reject("assumption (h) fails"))
        }
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    prop_assert!(approx.decomposition.residual <= 1e-9);
    let z2 = approx.outer.at(0.0).z2 + approx.initial.state(0.0);
    let target = p.z0.rows(m, n);
    prop_assert!((z2 - target).norm() <= 1e-10 * (1.0 + target.norm()));
    Ok(())
}

fn a9() -> Outcome {
    let config = Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    match runner.run(&random_instance(), |(seed, m, n, k, eps)| a9_case(seed, m, n, k, eps)) {
        Ok(()) => outcome(
            true,
            "weak duality, integrand sign, boundary condition, split residual on 100 cases",
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("A1", a1, Duration::from_secs(1)),
        ("A2", a2, Duration::from_secs(1)),
        ("A3", a3, Duration::from_secs(5)),
        ("A4", a4, Duration::from_secs(30)),
        ("A5", a5, Duration::from_secs(60)),
        ("A6", a6, Duration::from_secs(60)),
        ("A7", a7, Duration::from_secs(120)),
        ("A8", a8, Duration::from_secs(120)),
        ("A9", a9, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.passed && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{name} {} [{:.2?} / {:?}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed,
            budget,
            out.detail
        );
    }
    println!("acceptance: {} passed, {} failed", 9 - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
