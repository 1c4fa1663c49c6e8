use crate::circle_calculus::{derivative, l2_norm_sq, PeriodicGrid, PeriodicGridFn};
use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::weak_flow::EulerianFields;

use super::christoffel::christoffel_diag_with;

/// The run halts once `max |u_x|` exceeds this.
pub const UX_GUARD: f64 = 1e3;
/// The run halts once the energy drifts further than this from its start.
pub const ENERGY_DRIFT_GUARD: f64 = 1e-3;

/// Result of a method-of-lines run.
#[derive(Clone, Debug)]
pub struct OracleRun {
    pub fields: EulerianFields,
    pub steps: usize,
    pub dt: f64,
    /// Largest `|E(t) - E(0)|` seen after any step.
    pub max_energy_drift: f64,
}

pub fn oracle_solve(datum: &InitialDatum, t_end: f64, n: usize, dt: f64) -> Result<EulerianFields> {
    oracle_run(datum, t_end, n, dt).map(|r| r.fields)
}

/// Integrates `u_t = -u u_x + G1(u, rho)`, `rho_t = -(u rho)_x` with classical
/// RK4 and Fourier collocation on `n` nodes, re-pinning `u(0) = 0` after every
/// step. The step is shrunk so that it divides `t_end` evenly.
pub fn oracle_run(datum: &InitialDatum, t_end: f64, n: usize, dt: f64) -> Result<OracleRun> {
    let grid = PeriodicGrid::new(n)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("{t_end} must be finite and nonnegative")));
    }
    let t_star = datum.breakdown_time();
    if t_end >= t_star {
        return Err(Error::PastBreakdown { t_end, t_star });
    }
    if !(dt > 0.0 && dt <= 0.5 / n as f64) {
        return Err(Error::param("dt", format!("{dt} not in (0, 0.5/n = {}]", 0.5 / n as f64)));
    }

    let start = datum.on_grid(grid)?;
    let mut u = start.u_tilde().clone();
    let mut rho = start.rho_tilde().clone();
    let e0 = energy(&u, &rho);
    let steps = (t_end / dt).ceil() as usize;
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut max_drift = 0.0f64;

    for step in 0..steps {
        let t = dt * step as f64;
        let (k1u, k1r) = rhs(&u, &rho);
        let (a_u, a_r) = (axpy(&u, 0.5 * dt, &k1u), axpy(&rho, 0.5 * dt, &k1r));
        let (k2u, k2r) = rhs(&a_u, &a_r);
        let (b_u, b_r) = (axpy(&u, 0.5 * dt, &k2u), axpy(&rho, 0.5 * dt, &k2r));
        let (k3u, k3r) = rhs(&b_u, &b_r);
        let (c_u, c_r) = (axpy(&u, dt, &k3u), axpy(&rho, dt, &k3r));
        let (k4u, k4r) = rhs(&c_u, &c_r);
        u = combine(&u, dt, [&k1u, &k2u, &k3u, &k4u]);
        rho = combine(&rho, dt, [&k1r, &k2r, &k3r, &k4r]);
        let pin = u[0];
        u = u.map(|v| v - pin);

        let t_next = t + dt;
        let ux_max = derivative(&u).max_abs();
        if ux_max.is_nan() || ux_max > UX_GUARD {
            return Err(Error::Guard {
                t: t_next,
                detail: format!("max |u_x| = {ux_max:e} exceeds {UX_GUARD:e}"),
            });
        }
        let drift = (energy(&u, &rho) - e0).abs();
        max_drift = max_drift.max(drift);
        if drift.is_nan() || drift > ENERGY_DRIFT_GUARD {
            return Err(Error::Guard {
                t: t_next,
                detail: format!("energy drift {drift:e} exceeds {ENERGY_DRIFT_GUARD:e}"),
            });
        }
    }

    let u_x = derivative(&u);
    Ok(OracleRun {
        fields: EulerianFields {
            t: t_end,
            u,
            u_x,
            rho,
            mask: vec![false; n],
            pieces: None,
        },
        steps,
        dt,
        max_energy_drift: max_drift,
    })
}

fn rhs(u: &PeriodicGridFn, rho: &PeriodicGridFn) -> (PeriodicGridFn, PeriodicGridFn) {
    let ux = derivative(u);
    let gamma = christoffel_diag_with(u, &ux, rho);
    let du = PeriodicGridFn::new(
        u.grid(),
        (0..u.len())
            .map(|j| -u[j] * ux[j] + gamma.first[j])
            .collect(),
    )
    .expect("finite");
    (du, gamma.second)
}

fn energy(u: &PeriodicGridFn, rho: &PeriodicGridFn) -> f64 {
    l2_norm_sq(&derivative(u)) + l2_norm_sq(rho)
}

fn axpy(x: &PeriodicGridFn, a: f64, y: &PeriodicGridFn) -> PeriodicGridFn {
    x.zip_with(y, |p, q| p + a * q)
}

fn combine(x: &PeriodicGridFn, dt: f64, k: [&PeriodicGridFn; 4]) -> PeriodicGridFn {
    PeriodicGridFn::new(
        x.grid(),
        (0..x.len())
            .map(|j| x[j] + dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]))
            .collect(),
    )
    .expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::fixtures::*;
    use crate::weak_flow::eulerian_fields;

    fn l2_diff(a: &PeriodicGridFn, b: &PeriodicGridFn) -> f64 {
        l2_norm_sq(&a.zip_with(b, |p, q| p - q)).sqrt()
    }

    #[test]
    fn stationary_is_a_fixed_point() {
        let g = PeriodicGrid::new(32).unwrap();
        let run = oracle_run(&stationary(g), 1.0, 32, 1e-2).unwrap();
        assert!(run.fields.u.max_abs() <= 1e-10);
        assert!(run.fields.rho.max_abs_diff(&PeriodicGridFn::constant(g, 2.0)) <= 1e-10);
    }

    #[test]
    fn smooth_agrees_with_explicit_solution() {
        let g = PeriodicGrid::new(128).unwrap();
        let d = smooth(g);
        let run = oracle_run(&d, 0.3, 128, 1e-3).unwrap();
        let e = eulerian_fields(&d, 0.3);
        assert!(l2_diff(&run.fields.u, &e.u) <= 1e-4);
        assert!(l2_diff(&run.fields.rho, &e.rho) <= 1e-4);
        assert!(run.max_energy_drift <= 1e-6);
    }

    #[test]
    fn rejects_bad_requests() {
        let g = PeriodicGrid::new(64).unwrap();
        assert!(matches!(
            oracle_run(&piecewise(g), 0.8, 64, 1e-3),
            Err(Error::PastBreakdown { .. })
        ));
        assert!(oracle_run(&smooth(g), 0.3, 64, 0.1).is_err());
        assert!(oracle_run(&smooth(g), -1.0, 64, 1e-3).is_err());
    }

    #[test]
    fn guard_trips_near_blow_up() {
        // u0_x = -2 cos(2 pi x) with rho0 = 2|sin(pi x)|-like positivity removed:
        // a pure Hunter-Saxton datum breaks at t = pi/2 - atan(1)
        let g = PeriodicGrid::new(64).unwrap();
        let u = PeriodicGridFn::from_fn(g, |x| -(2.0 * std::f64::consts::PI * x).sin() * 2f64.sqrt() / std::f64::consts::PI);
        let rho = PeriodicGridFn::zeros(g);
        let (d, _) = crate::datum::normalize(u, rho).unwrap();
        let t_star = d.breakdown_time();
        assert!(t_star.is_finite());
        let res = oracle_run(&d, t_star - 1e-6, 64, 1e-3);
        assert!(matches!(res, Err(Error::Guard { .. })), "{res:?}");
    }
}
