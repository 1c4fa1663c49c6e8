//! Closed-form Lagrangian solution.
//!
//! Along each characteristic `z = U + iR` (with `U = u_x o phi`,
//! `R = rho o phi`) solves `z_t = -(z^2 + 4)/2`. Writing
//!
//! ```text
//! f = cos t + (u0_x/2) sin t,    g = (rho0/2) sin t
//! ```
//!
//! the flow map is `phi(t, x) = int_0^x (f^2 + g^2) dy`, its velocity is
//! `phi_t = 2 int_0^x (f f_t + g g_t) dy`, and `U = phi_tx/phi_x`,
//! `R = rho0/phi_x` wherever `phi_x > 0`.

use num_complex::Complex64;

use crate::circle_calculus::{
    hermite, hermite_slope, integrate, spectral_antiderivative, PeriodicGrid, PeriodicGridFn,
};
use crate::datum::{locate, InitialDatum, Interval, StructuredDatum, LEVEL_MATCH_TOL};
use crate::error::{Error, Result};

/// Denominator modulus below which a characteristic counts as blown up.
pub const BLOWUP_TOL: f64 = 1e-14;
/// Relative threshold: `phi_x <= FLAT_REL * max(phi_x)` counts as flat.
pub const FLAT_REL: f64 = 1e-12;

/// `z = U + iR` on one characteristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexCharacteristic {
    pub re: f64,
    pub im: f64,
}

impl ComplexCharacteristic {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<Complex64> for ComplexCharacteristic {
    fn from(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }
}

/// Solves `z_t = -(z^2 + 4)/2`, `z(0) = z0`, in the pole-free form
/// `(2 z0 cos t - 4 sin t) / (z0 sin t + 2 cos t)`.
pub fn riccati_solve(z0: ComplexCharacteristic, t: f64) -> Result<ComplexCharacteristic> {
    let z = z0.to_complex();
    let (s, c) = t.sin_cos();
    let den = z * s + 2.0 * c;
    if den.norm() <= BLOWUP_TOL {
        return Err(Error::BlowUp {
            t,
            re: z0.re,
            im: z0.im,
        });
    }
    Ok(((2.0 * z * c - 4.0 * s) / den).into())
}

/// `f, g` and their time derivatives at one Lagrangian label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub f: f64,
    pub g: f64,
    pub f_t: f64,
    pub g_t: f64,
}

impl Kinematics {
    pub fn new(ux0: f64, rho0: f64, t: f64) -> Self {
        Self::with_trig(ux0, rho0, t.sin_cos())
    }

    /// Same as [`Kinematics::new`] with `(sin t, cos t)` precomputed.
    pub fn with_trig(ux0: f64, rho0: f64, (s, c): (f64, f64)) -> Self {
        let a = 0.5 * ux0;
        let b = 0.5 * rho0;
        Self {
            f: c + a * s,
            g: b * s,
            f_t: -s + a * c,
            g_t: b * c,
        }
    }

    /// `phi_x = f^2 + g^2`.
    pub fn phi_x(&self) -> f64 {
        self.f * self.f + self.g * self.g
    }

    /// `phi_tx = 2 (f f_t + g g_t)`.
    pub fn phi_tx(&self) -> f64 {
        2.0 * (self.f * self.f_t + self.g * self.g_t)
    }

    /// `4 (f_t^2 + g_t^2)`, the Lagrangian energy density on `{phi_x > 0}`.
    pub fn energy_density(&self) -> f64 {
        4.0 * (self.f_t * self.f_t + self.g_t * self.g_t)
    }
}

/// `f(t, .)` and `g(t, .)` on the datum's grid.
pub fn fg(datum: &InitialDatum, t: f64) -> (PeriodicGridFn, PeriodicGridFn) {
    let trig = t.sin_cos();
    let kin = node_kinematics(datum, trig);
    let grid = datum.grid();
    (
        grid_fn(grid, kin.iter().map(|k| k.f)),
        grid_fn(grid, kin.iter().map(|k| k.g)),
    )
}

/// Exact state of one structured piece `[start, end)`: `phi` and `phi_t`
/// are affine there, with slopes `phi_x` and `phi_tx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieceState {
    pub start: f64,
    pub end: f64,
    pub phi_start: f64,
    pub phi_t_start: f64,
    pub rho0: f64,
    pub kin: Kinematics,
    pub flat: bool,
}

impl PieceState {
    pub fn phi_end(&self) -> f64 {
        self.phi_start + self.kin.phi_x() * (self.end - self.start)
    }

    pub fn phi_t_end(&self) -> f64 {
        self.phi_t_start + self.kin.phi_tx() * (self.end - self.start)
    }
}

/// Snapshot of the flow at time `t`.
#[derive(Clone, Debug)]
pub struct LagrangianState {
    pub t: f64,
    pub phi: PeriodicGridFn,
    pub phi_x: PeriodicGridFn,
    pub phi_t: PeriodicGridFn,
    pub phi_tx: PeriodicGridFn,
    /// `U = u_x o phi`; 0 on flat nodes.
    pub ux_lag: PeriodicGridFn,
    /// `R = rho o phi`; 0 on flat nodes.
    pub rho_lag: PeriodicGridFn,
    pub f: PeriodicGridFn,
    pub g: PeriodicGridFn,
    /// Nodes where `phi_x <= eps_flat` and `U`, `R` are undefined.
    pub flat: Vec<bool>,
    pub eps_flat: f64,
    /// `phi(1)`; equals 1 in the gauge.
    pub phi_end: f64,
    /// `phi_t(1)`; equals 0 in the gauge.
    pub phi_t_end: f64,
    pieces: Option<Vec<PieceState>>,
}

/// The flow evaluated at an arbitrary label `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangianPoint {
    pub x: f64,
    pub phi: f64,
    pub phi_t: f64,
    pub rho0: f64,
    pub kin: Kinematics,
    pub flat: bool,
}

impl LagrangianPoint {
    /// `u_x o phi`, or `None` on flat labels.
    pub fn ux(&self) -> Option<f64> {
        (!self.flat).then(|| self.kin.phi_tx() / self.kin.phi_x())
    }

    /// `rho o phi`, or `None` on flat labels.
    pub fn rho(&self) -> Option<f64> {
        (!self.flat).then(|| self.rho0 / self.kin.phi_x())
    }
}

/// Evaluates the closed-form flow at time `t`.
///
/// Structured data are integrated exactly piece by piece. Sampled data use
/// the spectral antiderivative, which is exact to rounding for smooth
/// band-limited data.
pub fn flow_map(datum: &InitialDatum, t: f64) -> LagrangianState {
    let grid = datum.grid();
    let trig = t.sin_cos();
    let kin = node_kinematics(datum, trig);
    let phi_x = grid_fn(grid, kin.iter().map(Kinematics::phi_x));
    let phi_tx = grid_fn(grid, kin.iter().map(Kinematics::phi_tx));

    let pieces = datum
        .structured()
        .map(|s| piece_states(s, trig, t));

    let (phi, phi_t, phi_end, phi_t_end) = match (&pieces, datum.structured()) {
        (Some(ps), Some(s)) => {
            let at = |x: f64, value: fn(&PieceState, f64) -> f64| {
                let p = &ps[s.piece_index(x)];
                value(p, x)
            };
            let phi = PeriodicGridFn::from_fn(grid, |x| {
                at(x, |p, x| p.phi_start + p.kin.phi_x() * (x - p.start))
            });
            let phi_t = PeriodicGridFn::from_fn(grid, |x| {
                at(x, |p, x| p.phi_t_start + p.kin.phi_tx() * (x - p.start))
            });
            let last = ps.last().expect("at least one piece");
            (phi, phi_t, last.phi_end(), last.phi_t_end())
        }
        _ => (
            spectral_antiderivative(&phi_x),
            spectral_antiderivative(&phi_tx),
            integrate(&phi_x),
            integrate(&phi_tx),
        ),
    };

    let max_phi_x = match &pieces {
        Some(ps) => ps.iter().map(|p| p.kin.phi_x()).fold(0.0, f64::max),
        None => phi_x.max_abs(),
    };
    let eps_flat = FLAT_REL * max_phi_x;
    let flat: Vec<bool> = phi_x.values().iter().map(|&v| v <= eps_flat).collect();
    let rho0 = datum.rho_tilde();
    let ux_lag = grid_fn(
        grid,
        (0..grid.n()).map(|j| if flat[j] { 0.0 } else { phi_tx[j] / phi_x[j] }),
    );
    let rho_lag = grid_fn(
        grid,
        (0..grid.n()).map(|j| if flat[j] { 0.0 } else { rho0[j] / phi_x[j] }),
    );

    LagrangianState {
        t,
        phi,
        phi_x,
        phi_t,
        phi_tx,
        ux_lag,
        rho_lag,
        f: grid_fn(grid, kin.iter().map(|k| k.f)),
        g: grid_fn(grid, kin.iter().map(|k| k.g)),
        flat,
        eps_flat,
        phi_end,
        phi_t_end,
        pieces,
    }
}

impl LagrangianState {
    pub fn grid(&self) -> PeriodicGrid {
        self.phi.grid()
    }

    /// Exact piece states for structured data.
    pub fn pieces(&self) -> Option<&[PieceState]> {
        self.pieces.as_deref()
    }

    /// Fraction of nodes flagged flat.
    pub fn flat_fraction(&self) -> f64 {
        self.flat.iter().filter(|&&b| b).count() as f64 / self.flat.len() as f64
    }

    /// Evaluates the flow at an arbitrary label in `[0, 1]`: exact for
    /// structured data, cubic Hermite in `x` otherwise (values and exact
    /// slopes `phi_x`, `phi_tx` at the nodes).
    pub fn point(&self, datum: &InitialDatum, x: f64) -> LagrangianPoint {
        let trig = self.t.sin_cos();
        if let (Some(ps), Some(s)) = (&self.pieces, datum.structured()) {
            if x >= 1.0 {
                let last = ps.last().expect("at least one piece");
                return LagrangianPoint {
                    x: 1.0,
                    phi: last.phi_end(),
                    phi_t: last.phi_t_end(),
                    rho0: last.rho0,
                    kin: last.kin,
                    flat: last.flat,
                };
            }
            let p = &ps[s.piece_index(x)];
            return LagrangianPoint {
                x,
                phi: p.phi_start + p.kin.phi_x() * (x - p.start),
                phi_t: p.phi_t_start + p.kin.phi_tx() * (x - p.start),
                rho0: p.rho0,
                kin: p.kin,
                flat: p.flat,
            };
        }
        let pd = datum.sample_at(x);
        let kin = Kinematics::with_trig(pd.ux, pd.rho, trig);
        let (phi, phi_t) = if x >= 1.0 {
            (self.phi_end, self.phi_t[0] + self.phi_t_end)
        } else {
            let (j, s) = locate(self.grid(), x);
            (self.hermite_phi(j, s), self.hermite_phi_t(j, s))
        };
        LagrangianPoint {
            x,
            phi,
            phi_t,
            rho0: pd.rho,
            kin,
            flat: kin.phi_x() <= self.eps_flat,
        }
    }

    /// Node values `(phi_j, phi_{j+1})` with the lift `phi(1) = phi_end`.
    fn phi_pair(&self, j: usize) -> (f64, f64) {
        let n = self.grid().n();
        let next = if j + 1 == n { self.phi_end } else { self.phi[j + 1] };
        (self.phi[j], next)
    }

    pub(crate) fn hermite_phi(&self, j: usize, s: f64) -> f64 {
        let n = self.grid().n();
        let (a, b) = self.phi_pair(j);
        hermite(a, b, self.phi_x[j], self.phi_x[(j + 1) % n], self.grid().h(), s)
    }

    /// `d phi / dx` of the Hermite cell `j` at fraction `s`.
    pub(crate) fn hermite_phi_slope(&self, j: usize, s: f64) -> f64 {
        let n = self.grid().n();
        let (a, b) = self.phi_pair(j);
        hermite_slope(a, b, self.phi_x[j], self.phi_x[(j + 1) % n], self.grid().h(), s)
    }

    fn hermite_phi_t(&self, j: usize, s: f64) -> f64 {
        let n = self.grid().n();
        let next = if j + 1 == n {
            self.phi_t[0] + self.phi_t_end
        } else {
            self.phi_t[j + 1]
        };
        hermite(
            self.phi_t[j],
            next,
            self.phi_tx[j],
            self.phi_tx[(j + 1) % n],
            self.grid().h(),
            s,
        )
    }

    /// Node value of `phi` with index `n` meaning the lifted endpoint.
    pub(crate) fn phi_node(&self, j: usize) -> f64 {
        if j == self.grid().n() {
            self.phi_end
        } else {
            self.phi[j]
        }
    }
}

/// `B(t) = {rho0 = 0} and {u0_x = -2 cot t}`, empty when `sin t = 0`.
///
/// Structured data return exact merged pieces; sampled data return maximal
/// runs of nodes inside the eps-band.
pub fn breakdown_set(datum: &InitialDatum, t: f64, eps: f64) -> Vec<Interval> {
    let (s, c) = t.sin_cos();
    if s == 0.0 {
        return Vec::new();
    }
    let level = -2.0 * c / s;
    match datum.structured() {
        Some(sd) => {
            let tol = eps.max(LEVEL_MATCH_TOL);
            let mut out: Vec<Interval> = Vec::new();
            for i in sd.coincidence_pieces(level, tol) {
                let p = sd.piece(i);
                match out.last_mut() {
                    Some(last) if last.end == p.start => last.end = p.end,
                    _ => out.push(p),
                }
            }
            out
        }
        None => {
            let grid = datum.grid();
            let ux = datum.u_tilde_x();
            let rho = datum.rho_tilde();
            let mut out = Vec::new();
            let mut start = None;
            for j in 0..=grid.n() {
                let hit = j < grid.n() && (ux[j] - level).abs() <= eps && rho[j].abs() <= eps;
                match (hit, start) {
                    (true, None) => start = Some(j),
                    (false, Some(a)) => {
                        out.push(Interval::new(grid.node(a), grid.node(j - 1)));
                        start = None;
                    }
                    _ => {}
                }
            }
            out
        }
    }
}

fn node_kinematics(datum: &InitialDatum, trig: (f64, f64)) -> Vec<Kinematics> {
    datum
        .u_tilde_x()
        .values()
        .iter()
        .zip(datum.rho_tilde().values())
        .map(|(&ux, &rho)| Kinematics::with_trig(ux, rho, trig))
        .collect()
}

fn piece_states(s: &StructuredDatum, trig: (f64, f64), _t: f64) -> Vec<PieceState> {
    let kins: Vec<Kinematics> = (0..s.piece_count())
        .map(|i| Kinematics::with_trig(s.ux()[i], s.rho()[i], trig))
        .collect();
    let max_phi_x = kins.iter().map(Kinematics::phi_x).fold(0.0, f64::max);
    let eps_flat = FLAT_REL * max_phi_x;
    let mut phi = 0.0;
    let mut phi_t = 0.0;
    let mut out = Vec::with_capacity(kins.len());
    for (i, kin) in kins.into_iter().enumerate() {
        let p = s.piece(i);
        let state = PieceState {
            start: p.start,
            end: p.end,
            phi_start: phi,
            phi_t_start: phi_t,
            rho0: s.rho()[i],
            kin,
            flat: kin.phi_x() <= eps_flat,
        };
        phi = state.phi_end();
        phi_t = state.phi_t_end();
        out.push(state);
    }
    out
}

fn grid_fn(grid: PeriodicGrid, values: impl Iterator<Item = f64>) -> PeriodicGridFn {
    PeriodicGridFn::new(grid, values.collect()).expect("closed-form values are finite")
}
