//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::time::{Duration, Instant};

use hunter_saxton::circle_calculus::{
    derivative, inverse_a, l2_norm_sq, mean_zero_project, PeriodicGrid, PeriodicGridFn,
};
use hunter_saxton::datum::fixtures::{
    flat_minimum_structure, piecewise, piecewise_structure, smooth, stationary,
};
use hunter_saxton::datum::{InitialDatum, StructuredDatum};
use hunter_saxton::geodesic_validator::{
    christoffel_bilinear, christoffel_diag, geodesic_residual, oracle_run, residual_threshold,
    weak_solution_audit, AuditOptions,
};
use hunter_saxton::lagrangian::{riccati_solve, ComplexCharacteristic, Kinematics};
use hunter_saxton::weak_flow::{energy_report, eulerian_fields};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    summary: String,
}

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(n).unwrap()
}

fn fixtures(n: usize) -> [(&'static str, InitialDatum); 3] {
    [
        ("STAT", stationary(grid(n))),
        ("SMOOTH", smooth(grid(n))),
        ("PW", piecewise(grid(n))),
    ]
}

fn l2_diff(a: &PeriodicGridFn, b: &PeriodicGridFn) -> f64 {
    l2_norm_sq(&a.zip_with(b, |p, q| p - q)).sqrt()
}

fn c1_breakdown_formula() -> Outcome {
    let pw = piecewise(grid(256)).breakdown_time();
    let flat = InitialDatum::from_structured(flat_minimum_structure(), grid(256)).breakdown_time();
    let stat = stationary(grid(256)).breakdown_time();
    let sm = smooth(grid(256)).breakdown_time();
    Outcome {
        pass: pw == FRAC_PI_4 && flat == FRAC_PI_2 && stat == f64::INFINITY && sm == f64::INFINITY,
        summary: format!("PW {pw:?}, min-zero {flat:?}, STAT {stat}, SMOOTH {sm}"),
    }
}

fn c2_breakdown_by_bisection() -> Outcome {
    // first t in (0, pi) with min_x phi_x(t, .) <= 1e-10, from the closed form
    let s = piecewise_structure();
    let min_phi_x = |t: f64| {
        (0..s.piece_count())
            .map(|i| Kinematics::new(s.ux()[i], s.rho()[i], t).phi_x())
            .fold(f64::INFINITY, f64::min)
    };
    let below = |t: f64| min_phi_x(t) <= 1e-10;
    // scan for the first bracket, then bisect on the predicate
    let m = 100_000;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for i in 1..m {
        let t = PI * i as f64 / m as f64;
        if below(t) {
            hi = t;
            break;
        }
        lo = t;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_star = piecewise(grid(256)).breakdown_time();
    let gap = (hi - t_star).abs();
    Outcome {
        pass: gap <= 1e-8,
        summary: format!(
            "bisection t = {hi:?}, formula T* = {t_star:?}, |diff| = {gap:.3e} (tol 1e-8); \
             phi_x vanishes quadratically at T*, so the 1e-10 crossing precedes it by sqrt(5e-11)"
        ),
    }
}

fn c3_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for (_, d) in fixtures(512).into_iter().skip(1) {
        let eps = d.default_zero_eps();
        let mut count = 0;
        while count < 200 {
            let t = rng.gen_range(0.0..TAU);
            if d.distance_to_defect(t, eps).0 < 1e-3 {
                continue;
            }
            worst = worst.max((energy_report(&d, t, eps).measured_e - 4.0).abs());
            count += 1;
        }
        used += count;
    }
    Outcome {
        pass: worst <= 1e-6,
        summary: format!("max |E - 4| = {worst:.3e} over {used} samples (tol 1e-6)"),
    }
}

fn c4_defect_law() -> Outcome {
    let d = piecewise(grid(256));
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [FRAC_PI_4, 3.0 * FRAC_PI_4] {
        let r = energy_report(&d, t, 0.0);
        ok &= r.defect_measure == 0.25
            && (r.measured_e - 2.0).abs() <= 1e-6
            && (r.predicted_e - 2.0).abs() <= 1e-6;
        parts.push(format!(
            "t = {t:.6}: measured {:?}, predicted {:?}, lambda {:?}",
            r.measured_e, r.predicted_e, r.defect_measure
        ));
    }
    Outcome {
        pass: ok,
        summary: parts.join("; "),
    }
}

fn c5_oracle_equivalence() -> Outcome {
    let t = 0.3;
    let errors: Vec<(f64, f64, f64)> = [256, 512]
        .iter()
        .map(|&n| {
            let d = smooth(grid(n));
            let run = oracle_run(&d, t, n, 1e-4).expect("oracle runs");
            let e = eulerian_fields(&d, t);
            (
                l2_diff(&run.fields.u, &e.u),
                l2_diff(&run.fields.rho, &e.rho),
                run.max_energy_drift,
            )
        })
        .collect();
    let (u256, r256, drift) = errors[0];
    let (u512, r512, _) = errors[1];
    let total = |(u, r, _): (f64, f64, f64)| u.hypot(r);
    let ratio = total(errors[0]) / total(errors[1]);
    Outcome {
        pass: u256 <= 1e-4 && r256 <= 1e-4 && ratio >= 4.0,
        summary: format!(
            "n=256: L2(u) {u256:.3e}, L2(rho) {r256:.3e}; n=512: L2(u) {u512:.3e}, \
             L2(rho) {r512:.3e}; decrease x{ratio:.1} (need 4); oracle energy drift {drift:.1e}"
        ),
    }
}

fn c6_riccati_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut checked = 0;
    while checked < 100 {
        let r = 3.0 * rng.gen::<f64>().sqrt();
        let a = TAU * rng.gen::<f64>();
        let z0 = ComplexCharacteristic::new(r * a.cos(), r * a.sin());
        let t = rng.gen_range(0.0..TAU);
        // away from blow-up: the denominator stays at least 1 on the stencil
        let den = |s: f64| (Complex64::new(z0.re, z0.im) * s.sin() + 2.0 * s.cos()).norm();
        if den(t - h).min(den(t)).min(den(t + h)) < 1.0 {
            skipped += 1;
            continue;
        }
        let z = |s: f64| {
            let c = riccati_solve(z0, s).unwrap();
            Complex64::new(c.re, c.im)
        };
        let fd = (z(t + h) - z(t - h)) / (2.0 * h);
        worst = worst.max((fd + 0.5 * (z(t) * z(t) + 4.0)).norm());
        checked += 1;
    }
    Outcome {
        pass: worst <= 1e-6,
        summary: format!("max residual {worst:.3e} over 100 characteristics ({skipped} near blow-up skipped)"),
    }
}

fn c7_weak_geodesic_residual() -> Outcome {
    let h = 1e-4;
    let bound = residual_threshold(h);
    let times: Vec<f64> = (0..20).map(|i| TAU * (i as f64 + 0.5) / 20.0 + 0.13).collect();
    let mut worst: f64 = 0.0;
    let mut orders: Vec<f64> = Vec::new();
    let mut ok = true;
    for (name, d) in fixtures(256) {
        for &t in &times {
            let r = match geodesic_residual(&d, t, h) {
                Ok(r) => r,
                Err(e) => {
                    ok = false;
                    eprintln!("  criterion 7: {name} t = {t}: {e}");
                    continue;
                }
            };
            worst = worst.max(r.max_weak());
            // order from h-halving, on the largest test mode while it is above the noise floor
            let sweep: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
                .iter()
                .map(|&hh| geodesic_residual(&d, t, hh).map(|r| r.max_weak()).unwrap_or(f64::NAN))
                .collect();
            if sweep[2] > 1e-9 {
                for w in sweep.windows(2) {
                    orders.push((w[0] / w[1]).log2());
                }
            }
        }
    }
    let (omin, omax) = orders
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    let order_ok = !orders.is_empty() && orders.iter().all(|o| (1.5..=2.5).contains(o));
    Outcome {
        pass: ok && worst <= bound && order_ok,
        summary: format!(
            "max weak residual {worst:.3e} (bound {bound:.1e}) over 3 x 20 times; \
             observed order in [{omin:.2}, {omax:.2}] from {} halvings",
            orders.len()
        ),
    }
}

fn c8_time_periodicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for (_, d) in fixtures(256) {
        for _ in 0..20 {
            let t = rng.gen_range(0.0..TAU);
            let a = eulerian_fields(&d, t);
            let b = eulerian_fields(&d, t + PI);
            for j in 0..d.grid().n() {
                if a.mask[j] || b.mask[j] {
                    continue;
                }
                worst = worst
                    .max((a.u[j] - b.u[j]).abs())
                    .max((a.rho[j] - b.rho[j]).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-8,
        summary: format!("max |field(t + pi) - field(t)| = {worst:.3e} over 3 x 20 times (tol 1e-8)"),
    }
}

fn c9_operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = grid(128);
    let mut inv_err: f64 = 0.0;
    let mut pol_err: f64 = 0.0;
    let random = |rng: &mut ChaCha8Rng| {
        let c: Vec<(f64, f64)> = (0..10).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        PeriodicGridFn::from_fn(g, move |x| {
            c.iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = TAU * (k + 1) as f64 * x;
                    a * w.cos() + b * w.sin()
                })
                .sum::<f64>()
        })
    };
    for _ in 0..50 {
        let f = mean_zero_project(&random(&mut rng));
        let back = derivative(&derivative(&inverse_a(&f).unwrap())).map(|v| -v);
        inv_err = inv_err.max(back.max_abs_diff(&f));

        let pin = |f: PeriodicGridFn| {
            let f0 = f[0];
            f.map(|v| v - f0)
        };
        let (u, v) = (pin(random(&mut rng)), pin(random(&mut rng)));
        let (rho, sigma) = (random(&mut rng), random(&mut rng));
        let diag = christoffel_diag(&u, &rho);
        let same = christoffel_bilinear(&u, &rho, &u, &rho);
        let uv = christoffel_bilinear(&u, &rho, &v, &sigma);
        let vu = christoffel_bilinear(&v, &sigma, &u, &rho);
        pol_err = pol_err
            .max(same.first.max_abs_diff(&diag.first))
            .max(uv.first.max_abs_diff(&vu.first))
            .max(uv.second.max_abs_diff(&vu.second));
    }
    let mut fixed: f64 = 0.0;
    for c in [-3.0, 0.5, 2.0, 7.25] {
        let v = christoffel_diag(&PeriodicGridFn::zeros(g), &PeriodicGridFn::constant(g, c));
        fixed = fixed.max(v.first.max_abs());
    }
    Outcome {
        pass: inv_err <= 1e-8 && fixed <= 1e-12 && pol_err <= 1e-12,
        summary: format!(
            "-d2 A^-1 = id: {inv_err:.2e} (1e-8); Gamma(0, c): {fixed:.2e} (1e-12); \
             polarization/symmetry: {pol_err:.2e} (1e-12)"
        ),
    }
}

fn c10_weak_solution_audit() -> Outcome {
    let times: Vec<f64> = (0..10).map(|i| 3.0 * i as f64 / 9.0).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, d) in fixtures(256) {
        let r = weak_solution_audit(&d, &times, AuditOptions::default()).unwrap();
        ok &= r.passes();
        parts.push(format!(
            "{name}: a {} b {} c {} (sup E {:.9}) d {} ({:.1e})",
            r.a_h1_finite.pass,
            r.b_initial_data.pass,
            r.c_bounded.pass,
            r.c_bounded.value,
            r.d_geodesic.pass,
            r.d_geodesic.value
        ));
    }
    Outcome {
        pass: ok,
        summary: parts.join("; "),
    }
}

fn main() {
    // pin the structured fixture against its defining constants before anything else
    let s: StructuredDatum = piecewise_structure();
    assert_eq!(s.breakpoints(), [0.0, 0.25, 0.5, 1.0]);

    let criteria: [Criterion; 10] = [
        (1, "breakdown-time formula", Duration::from_secs(1), c1_breakdown_formula),
        (2, "breakdown time by bisection on phi_x", Duration::from_secs(5), c2_breakdown_by_bisection),
        (3, "energy conservation a.e.", Duration::from_secs(30), c3_conservation),
        (4, "defect law at pi/4 and 3pi/4", Duration::from_secs(5), c4_defect_law),
        (5, "oracle equivalence", Duration::from_secs(120), c5_oracle_equivalence),
        (6, "Riccati residual", Duration::from_secs(1), c6_riccati_residual),
        (7, "weak geodesic residual", Duration::from_secs(120), c7_weak_geodesic_residual),
        (8, "time periodicity", Duration::from_secs(10), c8_time_periodicity),
        (9, "operator identities", Duration::from_secs(5), c9_operator_identities),
        (10, "weak-solution audit", Duration::from_secs(60), c10_weak_solution_audit),
    ];
    let mut failed = Vec::new();
    for (k, name, budget, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        println!(
            "criterion {k:>2} {}: {name}: {} [{:.2}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.summary,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
        if !pass {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
