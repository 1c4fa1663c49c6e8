//! Initial data `(u0, rho0)` in the normalized gauge `|u0_x|^2 + |rho0|^2 = 4`.
//!
//! A datum is always sampled on a [`PeriodicGrid`]. It may additionally
//! carry a [`StructuredDatum`]: piecewise-constant `u0_x` and `rho0`, for
//! which level sets, breakdown sets and every derived quantity can be
//! evaluated exactly instead of up to sampling resolution.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circle_calculus::{
    derivative, hermite, integrate, l2_norm_sq, PeriodicGrid, PeriodicGridFn, MEAN_ZERO_TOL,
};
use crate::error::{Error, Result};

/// Tolerance on the gauge `|u0_x|^2 + |rho0|^2 = 4` for sampled data.
pub const ENERGY_TOL: f64 = 1e-8;
/// Tolerance on the gauge and periodicity for structured data.
pub const STRUCTURED_TOL: f64 = 1e-12;
/// Tolerance on the pinning `u0(0) = 0`.
pub const PIN_TOL: f64 = 1e-9;
/// Default band for deciding `rho0 = 0` on sampled data.
pub const DEFAULT_ZERO_EPS: f64 = 1e-10;
/// Floor on the band used when matching a level `u0_x = c` on structured
/// pieces; `c` is usually computed from `-2 cot t` and carries rounding.
pub const LEVEL_MATCH_TOL: f64 = 1e-9;

/// Closed interval `[start, end]` of the circle coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x <= self.end
    }
}

/// Piecewise-constant `u0_x` and `rho0` on `[b_i, b_{i+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredDatum {
    breakpoints: Vec<f64>,
    ux: Vec<f64>,
    rho: Vec<f64>,
}

impl StructuredDatum {
    /// Validates shape, periodicity of `u0` and the energy gauge.
    pub fn new(breakpoints: Vec<f64>, ux: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let s = Self::unchecked(breakpoints, ux, rho)?;
        let drift = s.ux_integral();
        if drift.abs() > STRUCTURED_TOL {
            return Err(Error::datum("periodicity", format!("integral of u0_x is {drift:e}")));
        }
        let e = s.energy();
        if (e - 4.0).abs() > STRUCTURED_TOL {
            return Err(Error::datum("energy", format!("|u0_x|^2 + |rho0|^2 = {e}, expected 4")));
        }
        Ok(s)
    }

    /// Shape checks only; the gauge is left to the caller.
    fn unchecked(breakpoints: Vec<f64>, ux: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let pieces = breakpoints.len().saturating_sub(1);
        if pieces == 0 || ux.len() != pieces || rho.len() != pieces {
            return Err(Error::datum(
                "shape",
                format!(
                    "{} breakpoints need {} pieces, got ux {} and rho {}",
                    breakpoints.len(),
                    pieces,
                    ux.len(),
                    rho.len()
                ),
            ));
        }
        if breakpoints[0] != 0.0 || breakpoints[pieces] != 1.0 {
            return Err(Error::datum("breakpoints", "must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::datum("breakpoints", "must be strictly increasing"));
        }
        if ux.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(Error::datum("finite", "piece values must be finite"));
        }
        Ok(Self {
            breakpoints,
            ux,
            rho,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn ux(&self) -> &[f64] {
        &self.ux
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn piece_count(&self) -> usize {
        self.ux.len()
    }

    pub fn piece(&self, i: usize) -> Interval {
        Interval::new(self.breakpoints[i], self.breakpoints[i + 1])
    }

    /// Index of the piece `[b_i, b_{i+1})` containing `x`, after wrapping
    /// `x` into `[0, 1)`.
    pub fn piece_index(&self, x: f64) -> usize {
        let x = x.rem_euclid(1.0);
        let k = self.breakpoints.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.piece_count() - 1)
    }

    pub fn energy(&self) -> f64 {
        (0..self.piece_count())
            .map(|i| (self.ux[i].powi(2) + self.rho[i].powi(2)) * self.piece(i).len())
            .sum()
    }

    fn ux_integral(&self) -> f64 {
        (0..self.piece_count())
            .map(|i| self.ux[i] * self.piece(i).len())
            .sum()
    }

    /// `u0(x) = int_0^x u0_x`, exact.
    pub fn u_at(&self, x: f64) -> f64 {
        let x = x.rem_euclid(1.0);
        let mut acc = 0.0;
        for i in 0..self.piece_count() {
            let p = self.piece(i);
            if x < p.end {
                return acc + self.ux[i] * (x - p.start);
            }
            acc += self.ux[i] * p.len();
        }
        acc
    }

    /// Rescales by `alpha = 2/sqrt(E0)` into the gauge.
    pub fn normalize(self) -> Result<(Self, f64)> {
        let e0 = self.energy();
        if e0 <= 0.0 {
            return Err(Error::datum("energy", "zero datum cannot be normalized"));
        }
        let alpha = 2.0 / e0.sqrt();
        let scaled = Self::new(
            self.breakpoints,
            self.ux.iter().map(|v| alpha * v).collect(),
            self.rho.iter().map(|v| alpha * v).collect(),
        )?;
        Ok((scaled, alpha))
    }

    /// Merged intervals where `|rho0| <= eps`.
    fn zero_intervals(&self, eps: f64) -> Vec<Interval> {
        let mut out: Vec<Interval> = Vec::new();
        for i in 0..self.piece_count() {
            if self.rho[i].abs() <= eps {
                let p = self.piece(i);
                match out.last_mut() {
                    Some(last) if last.end == p.start => last.end = p.end,
                    _ => out.push(p),
                }
            }
        }
        out
    }

    /// Pieces on which `rho0 = 0` and `u0_x = c`, both within `tol`.
    pub fn coincidence_pieces(&self, c: f64, tol: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.piece_count())
            .filter(move |&i| self.rho[i].abs() <= tol && (self.ux[i] - c).abs() <= tol)
    }
}

/// Normalized initial datum on a grid.
#[derive(Clone, Debug)]
pub struct InitialDatum {
    u_tilde: PeriodicGridFn,
    rho_tilde: PeriodicGridFn,
    u_tilde_x: PeriodicGridFn,
    // x-derivatives used for Hermite evaluation between nodes
    u_tilde_xx: PeriodicGridFn,
    rho_tilde_x: PeriodicGridFn,
    structured: Option<StructuredDatum>,
    energy: f64,
}

/// `(u0_x, rho0)` at a single point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointDatum {
    pub ux: f64,
    pub rho: f64,
}

impl InitialDatum {
    /// Builds a datum from grid samples of `u0` and `rho0`; `u0_x` is the
    /// Fourier-collocation derivative of `u0`, so the samples should come
    /// from a smooth periodic function.
    pub fn from_samples(u: PeriodicGridFn, rho: PeriodicGridFn) -> Result<Self> {
        let d = Self::from_samples_unchecked(u, rho)?;
        d.check_gauge()?;
        Ok(d)
    }

    fn from_samples_unchecked(u: PeriodicGridFn, rho: PeriodicGridFn) -> Result<Self> {
        if u.grid() != rho.grid() {
            return Err(Error::datum("shape", "u and rho live on different grids"));
        }
        if u[0].abs() > PIN_TOL {
            return Err(Error::datum("pinning", format!("u0(0) = {:e}, expected 0", u[0])));
        }
        let ux = derivative(&u);
        let mean = integrate(&ux);
        if mean.abs() > MEAN_ZERO_TOL {
            return Err(Error::datum("periodicity", format!("integral of u0_x is {mean:e}")));
        }
        let energy = l2_norm_sq(&ux) + l2_norm_sq(&rho);
        Ok(Self {
            u_tilde_xx: derivative(&ux),
            rho_tilde_x: derivative(&rho),
            u_tilde: u,
            u_tilde_x: ux,
            rho_tilde: rho,
            structured: None,
            energy,
        })
    }

    /// Samples a structured datum on `grid`. Node `x_j` takes the value of
    /// the piece `[b_i, b_{i+1})` containing it.
    pub fn from_structured(s: StructuredDatum, grid: PeriodicGrid) -> Self {
        let ux = PeriodicGridFn::from_fn(grid, |x| s.ux[s.piece_index(x)]);
        let rho = PeriodicGridFn::from_fn(grid, |x| s.rho[s.piece_index(x)]);
        let u = PeriodicGridFn::from_fn(grid, |x| s.u_at(x));
        Self {
            u_tilde_xx: PeriodicGridFn::zeros(grid),
            rho_tilde_x: PeriodicGridFn::zeros(grid),
            u_tilde: u,
            u_tilde_x: ux,
            rho_tilde: rho,
            energy: s.energy(),
            structured: Some(s),
        }
    }

    fn check_gauge(&self) -> Result<()> {
        if (self.energy - 4.0).abs() > ENERGY_TOL {
            return Err(Error::datum(
                "energy",
                format!("|u0_x|^2 + |rho0|^2 = {}, expected 4", self.energy),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.u_tilde.grid()
    }

    pub fn u_tilde(&self) -> &PeriodicGridFn {
        &self.u_tilde
    }

    pub fn u_tilde_x(&self) -> &PeriodicGridFn {
        &self.u_tilde_x
    }

    pub fn rho_tilde(&self) -> &PeriodicGridFn {
        &self.rho_tilde
    }

    pub fn structured(&self) -> Option<&StructuredDatum> {
        self.structured.as_ref()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Resamples on another grid. Structured data resample exactly; sampled
    /// data are reinterpolated through their Fourier series.
    pub fn on_grid(&self, grid: PeriodicGrid) -> Result<Self> {
        if grid == self.grid() {
            return Ok(self.clone());
        }
        match &self.structured {
            Some(s) => Ok(Self::from_structured(s.clone(), grid)),
            None => {
                let u = trig_resample(&self.u_tilde, grid);
                let rho = trig_resample(&self.rho_tilde, grid);
                Self::from_samples_unchecked(u, rho)
            }
        }
    }

    /// `(u0_x, rho0)` at an arbitrary point: exact for structured data,
    /// cubic Hermite between nodes otherwise.
    pub fn sample_at(&self, x: f64) -> PointDatum {
        if let Some(s) = &self.structured {
            let i = s.piece_index(x);
            return PointDatum {
                ux: s.ux[i],
                rho: s.rho[i],
            };
        }
        let (j, frac) = locate(self.grid(), x);
        let n = self.grid().n();
        let k = (j + 1) % n;
        let h = self.grid().h();
        PointDatum {
            ux: hermite(
                self.u_tilde_x[j],
                self.u_tilde_x[k],
                self.u_tilde_xx[j],
                self.u_tilde_xx[k],
                h,
                frac,
            ),
            rho: hermite(
                self.rho_tilde[j],
                self.rho_tilde[k],
                self.rho_tilde_x[j],
                self.rho_tilde_x[k],
                h,
                frac,
            ),
        }
    }

    /// Set where `rho0` vanishes. Structured data report the exact union of
    /// pieces with `|rho0| <= eps`; sampled data report maximal runs of
    /// nodes with `|rho0(x_j)| <= eps` as `[x_first, x_last]`.
    pub fn zero_set(&self, eps: f64) -> Vec<Interval> {
        match &self.structured {
            Some(s) => s.zero_intervals(eps),
            None => node_runs(self.grid(), |j| self.rho_tilde[j].abs() <= eps),
        }
    }

    /// `lambda({u0_x = c} and {rho0 = 0})`.
    ///
    /// Exact on structured data (pieces matched within `max(eps, 1e-9)`).
    /// On sampled data this is the eps-band estimate
    /// `(1/n) #{j : |u0_x(x_j) - c| <= eps, |rho0(x_j)| <= eps}`.
    pub fn level_set_measure(&self, c: f64, eps: f64) -> f64 {
        match &self.structured {
            Some(s) => {
                let tol = eps.max(LEVEL_MATCH_TOL);
                s.coincidence_pieces(c, tol).fold(0.0, |acc, i| acc + s.piece(i).len())
            }
            None => {
                let n = self.grid().n();
                let hits = (0..n)
                    .filter(|&j| {
                        (self.u_tilde_x[j] - c).abs() <= eps && self.rho_tilde[j].abs() <= eps
                    })
                    .count();
                hits as f64 / n as f64
            }
        }
    }

    /// Minimum of `u0_x` over `{rho0 = 0}`, or `None` when `rho0` never
    /// vanishes.
    pub fn min_ux_on_zero_set(&self, eps: f64) -> Option<f64> {
        let vals: Vec<f64> = match &self.structured {
            Some(s) => (0..s.piece_count())
                .filter(|&i| s.rho[i].abs() <= eps)
                .map(|i| s.ux[i])
                .collect(),
            None => (0..self.grid().n())
                .filter(|&j| self.rho_tilde[j].abs() <= eps)
                .map(|j| self.u_tilde_x[j])
                .collect(),
        };
        vals.into_iter().reduce(f64::min)
    }

    /// First time the flow map flattens: `pi/2 + atan(min_{rho0 = 0} u0_x / 2)`,
    /// or `+inf` when `rho0` has no zeros.
    pub fn breakdown_time(&self) -> f64 {
        self.breakdown_time_with(self.default_zero_eps())
    }

    pub fn breakdown_time_with(&self, eps: f64) -> f64 {
        match self.min_ux_on_zero_set(eps) {
            Some(m) => FRAC_PI_2 + (0.5 * m).atan(),
            None => f64::INFINITY,
        }
    }

    /// Zero band used when none is supplied: exact for structured data.
    pub fn default_zero_eps(&self) -> f64 {
        if self.structured.is_some() {
            0.0
        } else {
            DEFAULT_ZERO_EPS
        }
    }

    /// Times in `[0, pi)` at which some piece (or node) of `{rho0 = 0}`
    /// satisfies `u0_x = -2 cot t`, i.e. `t = arccot(-u0_x/2)`. The set
    /// repeats with period `pi`.
    pub fn defect_times(&self, eps: f64) -> Vec<f64> {
        let values: Vec<f64> = match &self.structured {
            Some(s) => (0..s.piece_count())
                .filter(|&i| s.rho[i].abs() <= eps)
                .map(|i| s.ux[i])
                .collect(),
            None => (0..self.grid().n())
                .filter(|&j| self.rho_tilde[j].abs() <= eps)
                .map(|j| self.u_tilde_x[j])
                .collect(),
        };
        let mut times: Vec<f64> = values.into_iter().map(|p| arccot(-0.5 * p)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        times
    }

    /// Distance from `t` to the nearest defect time (on all periods), or
    /// `+inf` when there are none.
    pub fn distance_to_defect(&self, t: f64, eps: f64) -> (f64, Option<f64>) {
        let pi = std::f64::consts::PI;
        let mut best = (f64::INFINITY, None);
        for d in self.defect_times(eps) {
            let k = ((t - d) / pi).round();
            let nearest = d + k * pi;
            let dist = (t - nearest).abs();
            if dist < best.0 {
                best = (dist, Some(nearest));
            }
        }
        best
    }
}

/// `arccot` with range `(0, pi)`.
fn arccot(x: f64) -> f64 {
    FRAC_PI_2 - x.atan()
}

/// Rescales `(u, rho)` by `alpha = 2/sqrt(E0)` so the result is in the gauge.
///
/// `t_orig = t_norm / alpha` maps times of the normalized solution back,
/// following the invariance `u(t, x) -> alpha u(alpha t, x)`.
pub fn normalize(u: PeriodicGridFn, rho: PeriodicGridFn) -> Result<(InitialDatum, f64)> {
    let raw = InitialDatum::from_samples_unchecked(u, rho)?;
    if raw.energy <= 0.0 {
        return Err(Error::datum("energy", "zero datum cannot be normalized"));
    }
    let alpha = 2.0 / raw.energy.sqrt();
    let d = InitialDatum::from_samples_unchecked(
        raw.u_tilde.map(|v| alpha * v),
        raw.rho_tilde.map(|v| alpha * v),
    )?;
    d.check_gauge()?;
    Ok((d, alpha))
}

/// Node index `j` and fraction in `[0, 1)` for `x` wrapped into `[0, 1)`.
pub(crate) fn locate(grid: PeriodicGrid, x: f64) -> (usize, f64) {
    let n = grid.n();
    let scaled = x.rem_euclid(1.0) * n as f64;
    let j = (scaled.floor() as usize).min(n - 1);
    (j, (scaled - j as f64).clamp(0.0, 1.0))
}

fn node_runs(grid: PeriodicGrid, pred: impl Fn(usize) -> bool) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for j in 0..grid.n() {
        match (pred(j), start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push(Interval::new(grid.node(s), grid.node(j - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval::new(grid.node(s), grid.node(grid.n() - 1)));
    }
    out
}

fn trig_resample(f: &PeriodicGridFn, grid: PeriodicGrid) -> PeriodicGridFn {
    let m = f.len();
    let coeffs = crate::circle_calculus::fourier_coefficients(f, m);
    PeriodicGridFn::from_fn(grid, |x| {
        let mut acc = coeffs[0].re;
        for (k, c) in coeffs.iter().enumerate().take(m / 2).skip(1) {
            let w = 2.0 * std::f64::consts::PI * k as f64 * x;
            acc += 2.0 * (c.re * w.cos() - c.im * w.sin());
        }
        acc
    })
}

/// Named data used across the test suite and the documentation.
pub mod fixtures {
    use super::*;
    use std::f64::consts::PI;

    /// `u0 = 0`, `rho0 = 2`: the stationary solution.
    pub fn stationary(grid: PeriodicGrid) -> InitialDatum {
        InitialDatum::from_samples(PeriodicGridFn::zeros(grid), PeriodicGridFn::constant(grid, 2.0))
            .expect("stationary datum is normalized")
    }

    /// `u0 = sin(2 pi x)/(sqrt(2) pi)`, `rho0 = sqrt(3)`.
    pub fn smooth(grid: PeriodicGrid) -> InitialDatum {
        let u = PeriodicGridFn::from_fn(grid, |x| (2.0 * PI * x).sin() / (2f64.sqrt() * PI));
        InitialDatum::from_samples(u, PeriodicGridFn::constant(grid, 3f64.sqrt()))
            .expect("smooth datum is normalized")
    }

    /// Breakpoints `(0, 1/4, 1/2, 1)`, `u0_x = (-2, 2, 0)`, `rho0 = (0, 0, 2)`.
    pub fn piecewise_structure() -> StructuredDatum {
        StructuredDatum::new(vec![0.0, 0.25, 0.5, 1.0], vec![-2.0, 2.0, 0.0], vec![0.0, 0.0, 2.0])
            .expect("piecewise datum is normalized")
    }

    pub fn piecewise(grid: PeriodicGrid) -> InitialDatum {
        InitialDatum::from_structured(piecewise_structure(), grid)
    }

    /// A structured datum whose minimum of `u0_x` over `{rho0 = 0}` is 0.
    pub fn flat_minimum_structure() -> StructuredDatum {
        // pieces: u0_x = (0, 0, 0), rho0 = (0, 2, 2) on (0, 1/5, 3/5, 1)
        let r = (4.0f64 / 0.8).sqrt();
        StructuredDatum::new(vec![0.0, 0.2, 0.6, 1.0], vec![0.0, 0.0, 0.0], vec![0.0, r, r])
            .expect("flat-minimum datum is normalized")
    }
}

/// On-disk datum schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatumFile {
    Samples {
        n: usize,
        u: Vec<f64>,
        rho: Vec<f64>,
    },
    Structured {
        breakpoints: Vec<f64>,
        ux: Vec<f64>,
        rho: Vec<f64>,
    },
}

impl DatumFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates the file into a datum. Sampled files fix the grid
    /// themselves, so a requested `n` must agree; structured files are
    /// sampled on `n`. Unnormalized data are refused unless
    /// `auto_normalize`, in which case the scaling factor is returned.
    pub fn into_datum(self, n: Option<usize>, auto_normalize: bool) -> Result<(InitialDatum, f64)> {
        match self {
            DatumFile::Samples { n: file_n, u, rho } => {
                if let Some(req) = n {
                    if req != file_n {
                        return Err(Error::datum(
                            "grid",
                            format!("datum file has n = {file_n}, requested {req}"),
                        ));
                    }
                }
                let grid = PeriodicGrid::new(file_n)?;
                let u = PeriodicGridFn::new(grid, u)?;
                let rho = PeriodicGridFn::new(grid, rho)?;
                if auto_normalize {
                    normalize(u, rho)
                } else {
                    Ok((InitialDatum::from_samples(u, rho)?, 1.0))
                }
            }
            DatumFile::Structured {
                breakpoints,
                ux,
                rho,
            } => {
                let grid = PeriodicGrid::new(n.unwrap_or(DEFAULT_GRID))?;
                let (s, alpha) = if auto_normalize {
                    let raw = StructuredDatum::unchecked(breakpoints, ux, rho)?;
                    let drift = raw.ux_integral();
                    if drift.abs() > STRUCTURED_TOL {
                        return Err(Error::datum(
                            "periodicity",
                            format!("integral of u0_x is {drift:e}"),
                        ));
                    }
                    raw.normalize()?
                } else {
                    (StructuredDatum::new(breakpoints, ux, rho)?, 1.0)
                };
                Ok((InitialDatum::from_structured(s, grid), alpha))
            }
        }
    }

    /// Samples file for a datum's grid values.
    pub fn from_datum(d: &InitialDatum) -> Self {
        match d.structured() {
            Some(s) => DatumFile::Structured {
                breakpoints: s.breakpoints.clone(),
                ux: s.ux.clone(),
                rho: s.rho.clone(),
            },
            None => DatumFile::Samples {
                n: d.grid().n(),
                u: d.u_tilde.values().to_vec(),
                rho: d.rho_tilde.values().to_vec(),
            },
        }
    }
}

/// Grid size used for structured files when none is requested.
pub const DEFAULT_GRID: usize = 256;
