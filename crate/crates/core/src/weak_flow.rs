//! Conservative continuation of the flow past breakdown.
//!
//! The Eulerian solution is read off the Lagrangian one through the
//! generalized inverse `psi(y) = min{x : phi(x) >= y}`:
//! `u(y) = phi_t(psi(y))`, `u_x(y) = (phi_tx/phi_x)(psi(y))` and
//! `rho(y) = (rho0/phi_x)(psi(y))`. Nodes whose preimage lies in a flat
//! region of `phi` are masked.

use rayon::prelude::*;
use serde::Serialize;

use crate::circle_calculus::{derivative, PeriodicGrid, PeriodicGridFn};
use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::lagrangian::{flow_map, Kinematics, LagrangianState, PieceState, FLAT_REL};

/// Simpson steps used when the caller does not choose.
pub const DEFAULT_STEPS: usize = 256;
/// Smallest accepted number of Simpson steps.
pub const MIN_STEPS: usize = 32;
/// Slack allowed when checking that a sampled `phi` is nondecreasing.
pub const MONOTONE_TOL: f64 = 1e-12;

/// `varrho(t, x) = rho0(x) int_0^t chi_{phi_x > 0} / phi_x ds`, by
/// composite Simpson in `s` at every node. `steps` is rounded up to even.
///
/// At an abscissa where `1/phi_x` exceeds `1/eps_flat` the integrand is cut
/// to zero.
pub fn varrho_integral(datum: &InitialDatum, t: f64, steps: usize) -> Result<PeriodicGridFn> {
    if steps < MIN_STEPS {
        return Err(Error::param("steps", format!("{steps} < {MIN_STEPS}")));
    }
    if !t.is_finite() {
        return Err(Error::param("t", format!("{t} is not finite")));
    }
    let m = steps + steps % 2;
    let ds = t / m as f64;
    let ux = datum.u_tilde_x().values();
    let rho = datum.rho_tilde().values();

    // eps_flat depends on s through max_x phi_x(s, .)
    let trig: Vec<(f64, f64)> = (0..=m).map(|i| (ds * i as f64).sin_cos()).collect();
    let cutoffs: Vec<f64> = trig
        .par_iter()
        .map(|&tr| {
            let max = ux
                .iter()
                .zip(rho)
                .map(|(&a, &b)| Kinematics::with_trig(a, b, tr).phi_x())
                .fold(0.0, f64::max);
            FLAT_REL * max
        })
        .collect();

    let values: Vec<f64> = (0..ux.len())
        .into_par_iter()
        .map(|j| {
            if rho[j] == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for i in 0..=m {
                let px = Kinematics::with_trig(ux[j], rho[j], trig[i]).phi_x();
                let val = if px > cutoffs[i] { 1.0 / px } else { 0.0 };
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * val;
            }
            rho[j] * acc * ds / 3.0
        })
        .collect();
    PeriodicGridFn::new(datum.grid(), values)
}

/// `varrho_t = rho0 chi_{phi_x > 0} / phi_x` in closed form.
pub fn varrho_t(datum: &InitialDatum, lag: &LagrangianState) -> PeriodicGridFn {
    datum
        .rho_tilde()
        .zip_with(&lag.phi_x, |r, px| if px > lag.eps_flat { r / px } else { 0.0 })
}

/// The Lagrangian state together with `varrho` and `varrho_t`.
#[derive(Clone, Debug)]
pub struct WeakFlowState {
    pub t: f64,
    pub lag: LagrangianState,
    pub varrho: PeriodicGridFn,
    pub varrho_t: PeriodicGridFn,
}

pub fn weak_flow_state(datum: &InitialDatum, t: f64, steps: usize) -> Result<WeakFlowState> {
    let lag = flow_map(datum, t);
    let varrho = varrho_integral(datum, t, steps)?;
    let varrho_t = varrho_t(datum, &lag);
    Ok(WeakFlowState {
        t,
        lag,
        varrho,
        varrho_t,
    })
}

/// Generalized inverse of a sampled nondecreasing `phi` with `phi(0) = 0`
/// and `phi(1) = 1`, by inverting the sample polyline. Flat stretches map
/// to their left endpoint.
pub fn pseudo_inverse(phi: &PeriodicGridFn) -> Result<PeriodicGridFn> {
    let grid = phi.grid();
    let n = grid.n();
    let v = phi.values();
    if v[0].abs() > 1e-8 {
        return Err(Error::param("phi", format!("phi(0) = {} is not 0", v[0])));
    }
    if let Some(j) = (1..n).find(|&j| v[j] < v[j - 1] - MONOTONE_TOL) {
        return Err(Error::NotMonotone { index: j });
    }
    if v[n - 1] > 1.0 + MONOTONE_TOL {
        return Err(Error::NotMonotone { index: n });
    }
    let node = |k: usize| if k == n { 1.0 } else { v[k] };
    let out = grid
        .nodes()
        .map(|y| {
            let k = first_at_least(n, node, y);
            if k == 0 {
                return 0.0;
            }
            let (a, b) = (node(k - 1), node(k));
            grid.node(k - 1) + grid.h() * ((y - a) / (b - a)).clamp(0.0, 1.0)
        })
        .collect();
    PeriodicGridFn::new(grid, out)
}

/// First `k` in `0..=n` with `node(k) >= y`, or `n + 1` if none.
fn first_at_least(n: usize, node: impl Fn(usize) -> f64, y: f64) -> usize {
    let (mut lo, mut hi) = (0usize, n + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if node(mid) < y {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One structured piece seen in Eulerian coordinates: `u` is affine on
/// `[y_start, y_end]` with slope `ux`, and `rho` is constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EulerianPiece {
    pub x_start: f64,
    pub x_end: f64,
    pub y_start: f64,
    pub y_end: f64,
    pub u_start: f64,
    pub ux: f64,
    pub rho: f64,
    pub flat: bool,
}

impl EulerianPiece {
    pub(crate) fn from_state(p: &PieceState) -> Self {
        let px = p.kin.phi_x();
        let (ux, rho) = if p.flat {
            (0.0, 0.0)
        } else {
            (p.kin.phi_tx() / px, p.rho0 / px)
        };
        Self {
            x_start: p.start,
            x_end: p.end,
            y_start: p.phi_start,
            y_end: p.phi_end(),
            u_start: p.phi_t_start,
            ux,
            rho,
            flat: p.flat,
        }
    }

    /// `int (u_x^2 + rho^2) dy` over the piece.
    pub fn energy(&self) -> f64 {
        if self.flat {
            0.0
        } else {
            (self.ux * self.ux + self.rho * self.rho) * (self.y_end - self.y_start)
        }
    }
}

/// Eulerian solution at a single point `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerianPoint {
    pub y: f64,
    /// `psi(y)`.
    pub x: f64,
    pub u: f64,
    pub ux: f64,
    pub rho: f64,
    pub masked: bool,
    /// Index of the structured piece holding `psi(y)`, if any.
    pub piece: Option<usize>,
}

/// Eulerian snapshot on the grid. Masked nodes carry `u_x = rho = 0`.
#[derive(Clone, Debug)]
pub struct EulerianFields {
    pub t: f64,
    pub u: PeriodicGridFn,
    pub u_x: PeriodicGridFn,
    pub rho: PeriodicGridFn,
    pub mask: Vec<bool>,
    /// Exact piecewise form for structured data.
    pub pieces: Option<Vec<EulerianPiece>>,
}

impl EulerianFields {
    pub fn grid(&self) -> PeriodicGrid {
        self.u.grid()
    }

    pub fn unmasked_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| !m).count() as f64 / self.mask.len() as f64
    }

    /// `||u_x||^2 + ||rho||^2`: exact over pieces for structured data,
    /// periodic trapezoid over unmasked nodes otherwise.
    pub fn energy(&self) -> f64 {
        match &self.pieces {
            Some(ps) => ps.iter().map(EulerianPiece::energy).sum(),
            None => {
                let n = self.mask.len();
                (0..n)
                    .filter(|&j| !self.mask[j])
                    .map(|j| self.u_x[j].powi(2) + self.rho[j].powi(2))
                    .sum::<f64>()
                    / n as f64
            }
        }
    }
}

/// Evaluates the weak solution at arbitrary `y` in `[0, 1]`.
pub fn eulerian_point(datum: &InitialDatum, lag: &LagrangianState, y: f64) -> EulerianPoint {
    if let Some(ps) = lag.pieces() {
        return piecewise_point(ps, y);
    }
    let x = invert_sampled(lag, y);
    let p = lag.point(datum, x);
    EulerianPoint {
        y,
        x,
        u: p.phi_t,
        ux: p.ux().unwrap_or(0.0),
        rho: p.rho().unwrap_or(0.0),
        masked: p.flat,
        piece: None,
    }
}

fn piecewise_point(ps: &[PieceState], y: f64) -> EulerianPoint {
    // piece images meet at breakpoint images computed with rounding; a node
    // within a few ulps of one is assigned to the right-hand piece
    let tol = 64.0 * f64::EPSILON * y.abs().max(1.0);
    let k = ps
        .iter()
        .position(|p| p.flat && (p.phi_start - y).abs() <= tol)
        .unwrap_or_else(|| {
            ps.partition_point(|p| p.phi_end() <= y + tol)
                .min(ps.len() - 1)
        });
    let p = &ps[k];
    let e = EulerianPiece::from_state(p);
    if p.flat {
        return EulerianPoint {
            y,
            x: p.start,
            u: p.phi_t_start,
            ux: 0.0,
            rho: 0.0,
            masked: true,
            piece: Some(k),
        };
    }
    let x = (p.start + (y - p.phi_start) / p.kin.phi_x()).clamp(p.start, p.end);
    let u = e.u_start + e.ux * (y - e.y_start);
    // psi(y) = x_end lies in the next piece under the half-open convention
    if x >= p.end && k + 1 < ps.len() {
        let q = EulerianPiece::from_state(&ps[k + 1]);
        return EulerianPoint {
            y,
            x,
            u,
            ux: q.ux,
            rho: q.rho,
            masked: q.flat,
            piece: Some(k + 1),
        };
    }
    EulerianPoint {
        y,
        x,
        u,
        ux: e.ux,
        rho: e.rho,
        masked: false,
        piece: Some(k),
    }
}

/// Generalized inverse of the Hermite-interpolated flow map: bracket on the
/// nodes, then a safeguarded Newton solve inside the cell.
fn invert_sampled(lag: &LagrangianState, y: f64) -> f64 {
    let grid = lag.grid();
    let n = grid.n();
    let h = grid.h();
    let k = first_at_least(n, |k| lag.phi_node(k), y);
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return 1.0;
    }
    let j = k - 1;
    let (a, b) = (lag.phi_node(j), lag.phi_node(k));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut s = ((y - a) / (b - a)).clamp(0.0, 1.0);
    for _ in 0..80 {
        let g = lag.hermite_phi(j, s) - y;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
        let d = lag.hermite_phi_slope(j, s) * h;
        let mut next = s - g / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= f64::EPSILON {
            s = next;
            break;
        }
        s = next;
    }
    grid.node(j) + s * h
}

/// Eulerian fields on the datum's grid.
pub fn eulerian_fields(datum: &InitialDatum, t: f64) -> EulerianFields {
    let lag = flow_map(datum, t);
    eulerian_from_state(datum, &lag)
}

pub fn eulerian_from_state(datum: &InitialDatum, lag: &LagrangianState) -> EulerianFields {
    let grid = datum.grid();
    let points: Vec<EulerianPoint> = (0..grid.n())
        .into_par_iter()
        .map(|j| eulerian_point(datum, lag, grid.node(j)))
        .collect();
    let field = |f: fn(&EulerianPoint) -> f64| {
        PeriodicGridFn::new(grid, points.iter().map(f).collect()).expect("finite fields")
    };
    EulerianFields {
        t: lag.t,
        u: field(|p| p.u),
        u_x: field(|p| p.ux),
        rho: field(|p| p.rho),
        mask: points.iter().map(|p| p.masked).collect(),
        pieces: lag
            .pieces()
            .map(|ps| ps.iter().map(EulerianPiece::from_state).collect()),
    }
}

/// Measured energy against the defect-law prediction at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "measured_E")]
    pub measured_e: f64,
    #[serde(rename = "predicted_E")]
    pub predicted_e: f64,
    pub defect_measure: f64,
    pub is_defect_time: bool,
}

/// `measured_E = 4 int_{phi_x > eps_flat} (f_t^2 + g_t^2)` (exact over pieces
/// for structured data) and `predicted_E = 4 - 4 lambda / sin^2 t` with
/// `lambda = lambda({u0_x = -2 cot t} and {rho0 = 0})`.
pub fn energy_report(datum: &InitialDatum, t: f64, eps: f64) -> EnergyReport {
    let lag = flow_map(datum, t);
    let measured_e = match lag.pieces() {
        Some(ps) => ps
            .iter()
            .filter(|p| !p.flat)
            .map(|p| p.kin.energy_density() * (p.end - p.start))
            .sum(),
        None => {
            let trig = t.sin_cos();
            let ux = datum.u_tilde_x().values();
            let rho = datum.rho_tilde().values();
            let n = ux.len();
            (0..n)
                .filter(|&j| !lag.flat[j])
                .map(|j| Kinematics::with_trig(ux[j], rho[j], trig).energy_density())
                .sum::<f64>()
                / n as f64
        }
    };
    let s = t.sin();
    let (defect_measure, predicted_e) = if s == 0.0 {
        (0.0, 4.0)
    } else {
        let lambda = datum.level_set_measure(-2.0 * t.cos() / s, eps);
        (lambda, 4.0 - 4.0 * lambda / (s * s))
    };
    EnergyReport {
        t,
        measured_e,
        predicted_e,
        defect_measure,
        is_defect_time: defect_measure > 0.0,
    }
}

/// How `U_x` and `phi_x` are obtained from samples in [`tangent_membership_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SlopeRule {
    /// Cell differences of `U` and `phi`, with `F` and `varrho` taken constant
    /// on each cell `[x_j, x_{j+1})`. Exact for structured data whose
    /// breakpoints are nodes.
    #[default]
    Cellwise,
    /// Fourier-collocation derivatives at the nodes.
    Spectral,
}

/// Outcome of the tangent-space membership test at base `(phi, varrho)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub vanishes_at_zero: bool,
    pub flat_derivative_ok: bool,
    pub max_flat_derivative: f64,
    pub finite_integral: bool,
    pub integral: f64,
    /// `<(U, F), (U, F)>` at the base point, a quarter of `integral`.
    pub inner_product: f64,
}

impl MembershipReport {
    pub fn passes(&self) -> bool {
        self.vanishes_at_zero && self.flat_derivative_ok && self.finite_integral
    }
}

/// Checks `U(0) = 0`, `U_x = 0` on `{phi_x = 0}` and finiteness of
/// `int_{phi_x > 0} U_x^2/phi_x + (F - varrho)^2 phi_x`, using cell slopes.
pub fn tangent_membership(
    u: &PeriodicGridFn,
    f: &PeriodicGridFn,
    phi: &PeriodicGridFn,
    varrho: &PeriodicGridFn,
    eps: f64,
) -> MembershipReport {
    tangent_membership_with(u, f, phi, varrho, eps, SlopeRule::Cellwise)
}

pub fn tangent_membership_with(
    u: &PeriodicGridFn,
    f: &PeriodicGridFn,
    phi: &PeriodicGridFn,
    varrho: &PeriodicGridFn,
    eps: f64,
    rule: SlopeRule,
) -> MembershipReport {
    let n = u.len();
    let h = u.grid().h();
    // (U_x, phi_x, F - varrho) at each quadrature point
    let samples: Vec<(f64, f64, f64)> = match rule {
        SlopeRule::Cellwise => (0..n)
            .map(|j| {
                let k = (j + 1) % n;
                let phi_next = if k == 0 { phi[0] + 1.0 } else { phi[k] };
                (
                    (u[k] - u[j]) / h,
                    (phi_next - phi[j]) / h,
                    f[j] - varrho[j],
                )
            })
            .collect(),
        SlopeRule::Spectral => {
            let ux = derivative(u);
            let lift = PeriodicGridFn::from_fn(u.grid(), |x| x);
            let phi_x = derivative(&phi.zip_with(&lift, |a, b| a - b)).map(|v| v + 1.0);
            (0..n)
                .map(|j| (ux[j], phi_x[j], f[j] - varrho[j]))
                .collect()
        }
    };
    let max_phi_x = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let eps_flat = FLAT_REL * max_phi_x;
    let mut max_flat = 0.0f64;
    let mut integral = 0.0;
    for &(ux, px, df) in &samples {
        if px <= eps_flat {
            max_flat = max_flat.max(ux.abs());
        } else {
            integral += (ux * ux / px + df * df * px) * h;
        }
    }
    MembershipReport {
        vanishes_at_zero: u[0].abs() <= eps,
        flat_derivative_ok: max_flat <= eps,
        max_flat_derivative: max_flat,
        finite_integral: integral.is_finite(),
        integral,
        inner_product: 0.25 * integral,
    }
}
