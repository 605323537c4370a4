//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lurex::exact::QuadRat;
use lurex::fixtures::{self, LOOP2_ALPHA, LOOP2_X0_EXACT, LOOP2_X0_PERTURBED};
use lurex::lure::{
    boundedness_bound, check_theorem1_hypotheses, classify, random_x0_census, simulate_exact, ratio,
    CheckOutcome, ExactSetup, LureConfig, Mode, Verdict,
};
use lurex::oracles::{cayley_limit_check, limsup_probe, ExpTerm, ExponentialSum};
use lurex::realization::realize;
use lurex::spectral::{
    charpoly, eigenvalues, eigenvectors, find_simple_unstable, modal_output, subspace_angle, ModalExpansion,
};
use lurex::stability::{alpha_grid, closed_loop_spr, crossings, spr_sweep};
use lurex::testkit::random_system;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ANGLE_TOL: f64 = 1e-9;
const GAIN_TOL: f64 = 1e-9;
const EIGEN_TOL: f64 = 1e-10;
const SUBSPACE_TOL: f64 = 1e-8;
const UNIT_SPR_TOL: f64 = 1e-6;
const CHI_TOL: f64 = 1e-9;
const OUTPUT_GAIN_FLOOR: f64 = 1e-8;
const DET_TOL: f64 = 1e-9;
const GROWTH_OFFSET: f64 = 1e-6;
const CENSUS_MIN: usize = 99;
const CENSUS_BUDGET: Duration = Duration::from_secs(10);
const MODAL_TOL: f64 = 1e-8;
const RECURRENCE_TOL: f64 = 1e-8;
const EXACT_HORIZON: usize = 200;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn second_order_loop_setup() -> ExactSetup {
    ExactSetup::new(
        &[ratio(-1, 1), ratio(1, 1)],
        &[ratio(1, 2), ratio(-1, 1), ratio(1, 1)],
        &ratio(-5, 2),
        None,
    )
    .expect("second-order loop admits exact mode")
}

fn c1_crossings() -> Check {
    let cs = crossings(&fixtures::second_order_loop().transfer_function());
    let tn: Vec<f64> = cs.theta_n.iter().map(|c| c.theta).collect();
    let tp: Vec<f64> = cs.theta_p.iter().map(|c| c.theta).collect();
    ensure(tn.len() == 1 && (tn[0] - PI).abs() < ANGLE_TOL, format!("theta_n = {tn:?}"))?;
    let acos = 0.75f64.acos();
    ensure(
        tp.len() == 2 && (tp[0] + acos).abs() < ANGLE_TOL && (tp[1] - acos).abs() < ANGLE_TOL,
        format!("theta_p = {tp:?}"),
    )?;
    let (an, ap) = (cs.alpha_n.unwrap_or(f64::NAN), cs.alpha_p.unwrap_or(f64::NAN));
    ensure((an + 1.25).abs() < GAIN_TOL, format!("alpha_n = {an}"))?;
    ensure((ap - 0.5).abs() < GAIN_TOL, format!("alpha_p = {ap}"))?;
    Ok(format!("theta_n = {tn:.12?}, theta_p = {tp:.12?}, alpha_n = {an}, alpha_p = {ap}"))
}

fn c2_split() -> Check {
    let ss = realize(&fixtures::second_order_loop().transfer_function()).map_err(|e| e.to_string())?;
    let acl = ss.closed_loop(LOOP2_ALPHA);
    let s41 = 41f64.sqrt();
    let mut eig = eigenvalues(&acl);
    eig.sort_by(|a, b| a.re.total_cmp(&b.re));
    let expected = [-0.75 - 0.25 * s41, -0.75 + 0.25 * s41];
    for (z, e) in eig.iter().zip(expected) {
        ensure((z - e).norm() < EIGEN_TOL, format!("eigenvalue {z} vs {e}"))?;
    }
    let split = find_simple_unstable(&acl).map_err(|e| e.to_string())?;
    let xi_ref = DVector::from_vec(vec![Complex64::new(expected[0], 0.0), Complex64::new(1.0, 0.0)]);
    let xi_angle = subspace_angle(
        &DMatrix::from_column_slice(2, 1, split.xi.as_slice()),
        &DMatrix::from_column_slice(2, 1, xi_ref.as_slice()),
    );
    ensure(xi_angle < SUBSPACE_TOL, format!("xi angle {xi_angle:e}"))?;
    let x_ref = DMatrix::from_column_slice(2, 1, &[Complex64::new(expected[1], 0.0), Complex64::new(1.0, 0.0)]);
    let x_angle = subspace_angle(&split.x_basis, &x_ref);
    ensure(x_angle < SUBSPACE_TOL, format!("X angle {x_angle:e}"))?;
    Ok(format!("lambda = {:.12}, xi angle = {xi_angle:.1e}, X angle = {x_angle:.1e}", split.lambda))
}

fn c3_exact_trajectory() -> Check {
    let setup = second_order_loop_setup();
    let x0 = setup.parse_state(&LOOP2_X0_EXACT).map_err(|e| e.to_string())?;
    let traj = simulate_exact(&setup, &x0, EXACT_HORIZON).map_err(|e| e.to_string())?;
    let ex = &traj.exact.as_ref().unwrap().steps;
    ensure(ex[1].y == QuadRat::from_i64(23, 41).unwrap(), format!("y_1 = {}", ex[1].y))?;
    let y2 = QuadRat::parse("0.25 + 3.25√41", 41).unwrap();
    ensure(ex[2].y == y2, format!("y_2 = {}", ex[2].y))?;
    let modes = traj.modes();
    ensure(
        modes[..4].iter().all(|m| *m == Mode::S1) && modes[4..].iter().all(|m| *m == Mode::S2),
        format!("modes start {:?}", &modes[..6]),
    )?;
    ensure(traj.horizon() == EXACT_HORIZON, "horizon")?;
    let coord = ex[4].normal_coord.as_ref().ok_or("no normal coordinate")?;
    ensure(coord.is_zero(), format!("normal coordinate at k = 4 is {coord}"))?;
    let cfg = setup.float_config(&x0, EXACT_HORIZON);
    let report = classify(&traj, &cfg);
    ensure(report.verdict == Verdict::Convergent { limit: 0.0 }, format!("{:?}", report.verdict))?;
    let h = check_theorem1_hypotheses(&traj, None, cfg.tolerances.offx_tol);
    let first = h.reentry_checks.first().ok_or("no re-entry check")?;
    ensure(
        first.k == 4 && first.outcome == CheckOutcome::Fail && first.exact_zero == Some(true),
        format!("re-entry check {first:?}"),
    )?;
    Ok(format!(
        "y_1 = {}, y_2 = {}, modes S1 x4 then S2 through k = {EXACT_HORIZON}, verdict Convergent(0), re-entry at k = 4 fails",
        ex[1].y, ex[2].y
    ))
}

fn c4_perturbed_trajectory() -> Check {
    let setup = second_order_loop_setup();
    let x0 = setup.parse_state(&LOOP2_X0_PERTURBED).map_err(|e| e.to_string())?;
    let traj = simulate_exact(&setup, &x0, EXACT_HORIZON).map_err(|e| e.to_string())?;
    let cfg = setup.float_config(&x0, EXACT_HORIZON);
    let h = check_theorem1_hypotheses(&traj, None, cfg.tolerances.offx_tol);
    let first = h.reentry_checks.first().ok_or("no re-entry check")?;
    ensure(first.k == 4 && first.outcome == CheckOutcome::Pass, format!("re-entry check {first:?}"))?;
    let escape = (5..=traj.horizon()).find(|&k| traj.steps[k].mode != Mode::S2);
    ensure(escape.is_some(), "trajectory never leaves S2")?;
    let report = classify(&traj, &cfg);
    ensure(
        report.verdict == Verdict::SelfExcited { period: Some(2) },
        format!("{:?}", report.verdict),
    )?;
    let bound = boundedness_bound(&cfg).map_err(|e| e.to_string())?.bound;
    ensure(traj.max_abs_y() <= bound, format!("max |y| {} > bound {bound}", traj.max_abs_y()))?;
    Ok(format!(
        "re-entry at k = 4 passes (||P x_4|| = {:.3e}), leaves S2 at k = {}, SelfExcited period 2, max |y| = {:.4} <= {:.4}",
        first.proj_norm,
        escape.unwrap(),
        traj.max_abs_y(),
        bound
    ))
}

fn c5_example1() -> Check {
    let cs = crossings(&fixtures::example1().transfer_function());
    ensure(cs.theta_p.len() == 2, format!("card = {}", cs.theta_p.len()))?;
    Ok(format!("card(theta_p) = 2, alpha_p = {:.6}", cs.alpha_p.unwrap_or(f64::NAN)))
}

fn c6_example2() -> Check {
    let g = fixtures::example2().transfer_function();
    let ap = crossings(&g).alpha_p.ok_or("alpha_p undefined")?;
    ensure((0.58..=0.62).contains(&ap), format!("alpha_p = {ap}"))?;
    let sweep = spr_sweep(&g, &alpha_grid(0.0, 1.4, 2001)).map_err(|e| e.to_string())?;
    let pocket: Vec<f64> = sweep
        .alphas
        .iter()
        .zip(&sweep.spr_values)
        .filter(|(a, s)| (1.05..=1.2).contains(*a) && **s < 1.0)
        .map(|(a, _)| *a)
        .collect();
    ensure(!pocket.is_empty(), "no stable gain in [1.05, 1.2]")?;
    Ok(format!(
        "alpha_p = {ap:.6}, {} stable grid gains in [1.05, 1.2] ({:.4}..{:.4})",
        pocket.len(),
        pocket[0],
        pocket[pocket.len() - 1]
    ))
}

fn c7_endpoints_on_circle() -> Check {
    let mut systems = vec![fixtures::second_order_loop().transfer_function()];
    systems.extend((0..10).map(|s| random_system(700 + s, 2..=6)));
    let mut checked = 0;
    let mut worst = 0.0f64;
    for g in &systems {
        let cs = crossings(g);
        ensure(cs.alpha_n.is_some() || cs.alpha_p.is_some(), "no endpoint")?;
        for a in [cs.alpha_n, cs.alpha_p].into_iter().flatten() {
            let dev = (closed_loop_spr(g, a) - 1.0).abs();
            worst = worst.max(dev);
            ensure(dev < UNIT_SPR_TOL, format!("spr at {a} deviates by {dev:e}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} endpoints over 11 systems, max |spr - 1| = {worst:.1e}"))
}

fn c8_charpoly_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for s in 0..50 {
        let g = random_system(800 + s, 2..=6);
        let ss = realize(&g).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let alpha = rng.random_range(-5.0..5.0);
            let lhs = charpoly(&ss.closed_loop(alpha));
            let rhs = g.closed_loop_poly(alpha);
            let scale = rhs.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
            for i in 0..=g.order() {
                let err = (lhs.coeff(i) - rhs.coeff(i)).abs() / scale;
                worst = worst.max(err);
                ensure(err < CHI_TOL, format!("system {s}, alpha {alpha}, coeff {i}: {err:e}"))?;
            }
        }
    }
    Ok(format!("1000 closed loops, max scaled coefficient error = {worst:.1e}"))
}

fn c9_interior_stable() -> Check {
    let mut tested = 0;
    let mut worst = 0.0f64;
    for s in 0..50 {
        let g = random_system(900 + s, 2..=6);
        let (an, ap) = crossings(&g).interval();
        let lo = if an.is_finite() { an } else { ap - 10.0 };
        let hi = if ap.is_finite() { ap } else { an + 10.0 };
        for i in 1..20 {
            let alpha = lo + (hi - lo) * i as f64 / 20.0;
            let spr = closed_loop_spr(&g, alpha);
            worst = worst.max(spr);
            ensure(spr < 1.0, format!("system {s}: spr({alpha}) = {spr}"))?;
            tested += 1;
        }
    }
    Ok(format!("{tested} interior gains over 50 systems, max spr = {worst:.6}"))
}

fn c10_output_gain() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut count = 0;
    let mut worst = f64::INFINITY;
    for s in 0..50 {
        let g = random_system(1000 + s, 2..=6);
        let ss = realize(&g).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let alpha = rng.random_range(-5.0..5.0);
            for (mu, v) in eigenvectors(&ss.closed_loop(alpha)) {
                let gain: Complex64 = ss.c.iter().zip(v.iter()).map(|(c, x)| x * *c).sum();
                let ratio = gain.norm() / v.norm();
                worst = worst.min(ratio);
                ensure(ratio > OUTPUT_GAIN_FLOOR, format!("system {s}, eigenvalue {mu}: |C xi| = {ratio:e}"))?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} eigenvectors, min |C xi| / ||xi|| = {worst:.3e}"))
}

fn c11_det_at_one() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for s in 0..50 {
        let g = random_system(1100 + s, 2..=6);
        let ss = realize(&g).map_err(|e| e.to_string())?;
        let n = ss.order();
        let d1 = g.den().eval_real(1.0).abs();
        for _ in 0..10 {
            let alpha = rng.random_range(-10.0..10.0);
            let det = (DMatrix::<f64>::identity(n, n) - ss.closed_loop(alpha)).determinant().abs();
            let err = (det - d1).abs() / d1.max(1.0);
            worst = worst.max(err);
            ensure(err < DET_TOL, format!("system {s}, alpha {alpha}: {det} vs {d1}"))?;
        }
    }
    Ok(format!("500 gains, max |det(I - A - alpha B C)| - |D(1)| = {worst:.1e}"))
}

fn c12_growth() -> Check {
    let ss = realize(&fixtures::second_order_loop().transfer_function()).map_err(|e| e.to_string())?;
    let acl = ss.closed_loop(LOOP2_ALPHA);
    let split = find_simple_unstable(&acl).map_err(|e| e.to_string())?;
    let thresholds = [10.0, 1e3, 1e6];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut runs = 0;
    let mut latest = 0;
    while runs < 20 {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        if split.projection_norm(&x0) <= GROWTH_OFFSET {
            continue;
        }
        let modal = ModalExpansion::new(&acl, &x0).map_err(|e| e.to_string())?;
        let sum = ExponentialSum::new(modal.exponential_terms(&ss.c)).map_err(|e| e.to_string())?;
        let probe = limsup_probe(&sum, &thresholds, None);
        ensure(probe.all_reached(), format!("probe missed a threshold for x0 = {x0:?}"))?;
        // direct iteration of the linear loop must cross within the same window
        let mut x = x0.clone();
        let mut reached = 0;
        for k in 0..=probe.window {
            let y = (&ss.c * &x)[(0, 0)].abs();
            while reached < thresholds.len() && y >= thresholds[reached] {
                reached += 1;
                latest = latest.max(k);
            }
            x = &acl * x;
        }
        ensure(reached == thresholds.len(), format!("direct run reached only {reached} thresholds"))?;
        runs += 1;
    }
    Ok(format!("20 starts with ||P x0|| > 1e-6: all thresholds crossed, latest crossing at k = {latest}"))
}

fn c13_census() -> Check {
    let ss = realize(&fixtures::second_order_loop().transfer_function()).map_err(|e| e.to_string())?;
    let cfg = LureConfig::new(ss, LOOP2_ALPHA, DVector::zeros(2));
    let split = find_simple_unstable(&cfg.ss.closed_loop(cfg.alpha)).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = random_x0_census(&cfg, Some(&split), 100, 0, 10.0);
    let elapsed = start.elapsed();
    ensure(report.self_excited >= CENSUS_MIN, format!("{} of 100 self-excited", report.self_excited))?;
    ensure(elapsed < CENSUS_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{} of 100 self-excited in {:.2?}", report.self_excited, elapsed))
}

fn c14_modal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for s in 0..20 {
        let g = random_system(1400 + s, 2..=6);
        let ss = realize(&g).map_err(|e| e.to_string())?;
        let alpha = rng.random_range(-3.0..3.0);
        let acl = ss.closed_loop(alpha);
        let x0 = DVector::from_fn(ss.order(), |_, _| rng.random_range(-1.0..1.0));
        let modal = modal_output(&acl, &ss.c, &x0, 50).map_err(|e| format!("system {s}: {e}"))?;
        let mut x = x0.clone();
        let direct: Vec<f64> = (0..=50)
            .map(|_| {
                let y = (&ss.c * &x)[(0, 0)];
                x = &acl * &x;
                y
            })
            .collect();
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for (k, (m, d)) in modal.iter().zip(&direct).enumerate() {
            let err = (m - d).abs() / scale;
            worst = worst.max(err);
            ensure(err < MODAL_TOL, format!("system {s}, k = {k}: {m} vs {d}"))?;
        }
    }
    Ok(format!("20 systems, k <= 50, max relative error = {worst:.1e}"))
}

fn c15_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let thresholds = [10.0, 1e3, 1e6];
    let mut max_window = 0;
    for i in 0..10 {
        let terms_n = rng.random_range(1..=4);
        let mut terms: Vec<ExpTerm> = Vec::new();
        while terms.len() < terms_n {
            let r = if terms.is_empty() { rng.random_range(1.05..3.0) } else { rng.random_range(0.1..2.0) };
            let base = Complex64::from_polar(r, rng.random_range(-PI..PI));
            if terms.iter().any(|t| (t.base - base).norm() < 1e-3) {
                continue;
            }
            let deg = rng.random_range(0..=2);
            let mut coeffs: Vec<Complex64> = (0..=deg)
                .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect();
            if coeffs[deg].norm() < 0.1 {
                coeffs[deg] = Complex64::new(1.0, 0.0);
            }
            terms.push(ExpTerm { coeffs, base });
        }
        let sum = ExponentialSum::new(terms).map_err(|e| e.to_string())?;
        let probe = limsup_probe(&sum, &thresholds, None);
        ensure(probe.all_reached(), format!("sum {i}: ladder not crossed within {}", probe.window))?;
        max_window = max_window.max(probe.window);
    }
    let mut worst = 0.0f64;
    for s in 0..20 {
        let g = random_system(1500 + s, 2..=6);
        let ss = realize(&g).map_err(|e| e.to_string())?;
        let alpha = rng.random_range(-3.0..3.0);
        let x = DVector::from_fn(ss.order(), |_, _| rng.random_range(-1.0..1.0));
        let y = ss.c.transpose();
        let report = cayley_limit_check(&ss.closed_loop(alpha), &x, &y, 60).map_err(|e| e.to_string())?;
        worst = worst.max(report.recurrence_residual);
        ensure(
            report.recurrence_residual < RECURRENCE_TOL,
            format!("system {s}: residual {:e}", report.recurrence_residual),
        )?;
    }
    Ok(format!(
        "10 random sums crossed {{10, 1e3, 1e6}} (largest window {max_window}); recurrence residual max {worst:.1e} over 20 closed loops"
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("second-order loop crossing sets and gain interval", c1_crossings),
        ("second-order loop spectral split at alpha = -2.5", c2_split),
        ("exact trajectory on the stable subspace", c3_exact_trajectory),
        ("perturbed exact trajectory oscillates", c4_perturbed_trajectory),
        ("fourth-order example: two positive crossings", c5_example1),
        ("fourth-order example with a stable pocket", c6_example2),
        ("interval endpoints put a root on the unit circle", c7_endpoints_on_circle),
        ("closed-loop characteristic polynomial identity", c8_charpoly_identity),
        ("gains strictly inside the interval are stable", c9_interior_stable),
        ("every closed-loop eigenvector is observed", c10_output_gain),
        ("det(I - A - alpha B C) is independent of alpha", c11_det_at_one),
        ("growth off the stable subspace", c12_growth),
        ("random initial states are self-excited", c13_census),
        ("modal expansion matches direct iteration", c14_modal),
        ("exponential-sum and limit oracles", c15_oracles),
    ];
    let suite_start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed in {:.2?}",
        15 - failures,
        suite_start.elapsed()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
