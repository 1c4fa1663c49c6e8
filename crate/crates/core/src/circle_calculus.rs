//! Discrete calculus on the unit circle `S = R/Z`.
//!
//! Functions are sampled on the uniform grid `x_j = j/n`. Full-period
//! integrals use the periodic trapezoid rule, derivatives use Fourier
//! collocation, and `A^{-1}` inverts the inertia operator `-d^2/dx^2` on
//! mean-zero functions.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Absolute tolerance below which a mean counts as zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Uniform grid on the unit circle with an even number of nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid { n });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing `1/n`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }
}

/// Real samples of a function on a [`PeriodicGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGridFn {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl PeriodicGridFn {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().map(f).collect();
        Self::new(grid, values).expect("sampled function must be finite")
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for PeriodicGridFn {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// Selects how [`derivative_with`] differentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiffRule {
    /// Fourier collocation with the Nyquist mode zeroed.
    #[default]
    Spectral,
    /// Second-order centered differences, for data with kinks or jumps.
    CenteredDifference,
}

/// Periodic trapezoid rule `(1/n) sum_j f(x_j)`.
pub fn integrate(f: &PeriodicGridFn) -> f64 {
    f.values.iter().sum::<f64>() / f.len() as f64
}

/// Composite trapezoid `F(x_j) = int_0^{x_j} f`, with `F(x_0) = 0`.
///
/// Nondecreasing whenever `f >= 0`; second-order accurate at interior nodes.
pub fn cumulative_integral(f: &PeriodicGridFn) -> PeriodicGridFn {
    let h = f.grid.h();
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(f.len());
    values.push(0.0);
    for w in f.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        values.push(acc);
    }
    PeriodicGridFn {
        grid: f.grid,
        values,
    }
}

/// Spectral antiderivative `F(x_j) = int_0^{x_j} f` for smooth periodic `f`.
///
/// The mean contributes the linear ramp `x * integrate(f)`; the remaining
/// modes are integrated exactly in Fourier space. The Nyquist mode is
/// dropped since its antiderivative vanishes on the nodes.
pub fn spectral_antiderivative(f: &PeriodicGridFn) -> PeriodicGridFn {
    let n = f.len();
    let mean = integrate(f);
    let mut coeffs = forward(&f.values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        let m = wavenumber(k, n);
        *c = if m == 0 || 2 * k == n {
            Complex64::new(0.0, 0.0)
        } else {
            *c / Complex64::new(0.0, 2.0 * PI * m as f64)
        };
    }
    let periodic = inverse(coeffs);
    let p0 = periodic[0];
    let values = periodic
        .iter()
        .enumerate()
        .map(|(j, p)| mean * f.grid.node(j) + p - p0)
        .collect();
    PeriodicGridFn {
        grid: f.grid,
        values,
    }
}

/// Fourier-collocation derivative.
pub fn derivative(f: &PeriodicGridFn) -> PeriodicGridFn {
    derivative_with(f, DiffRule::Spectral)
}

pub fn derivative_with(f: &PeriodicGridFn, rule: DiffRule) -> PeriodicGridFn {
    let n = f.len();
    let values = match rule {
        DiffRule::Spectral => {
            let mut coeffs = forward(&f.values);
            for (k, c) in coeffs.iter_mut().enumerate() {
                let m = wavenumber(k, n);
                *c = if 2 * k == n {
                    Complex64::new(0.0, 0.0)
                } else {
                    *c * Complex64::new(0.0, 2.0 * PI * m as f64)
                };
            }
            inverse(coeffs)
        }
        DiffRule::CenteredDifference => {
            let inv_2h = 0.5 * n as f64;
            (0..n)
                .map(|j| (f.values[(j + 1) % n] - f.values[(j + n - 1) % n]) * inv_2h)
                .collect()
        }
    };
    PeriodicGridFn {
        grid: f.grid,
        values,
    }
}

/// Inverse of `A = -d^2/dx^2` on mean-zero functions:
///
/// `g(x) = -int_0^x int_0^y f dz dy + x int_0^1 int_0^y f dz dy`,
///
/// evaluated with two nested spectral antiderivatives so that
/// `-g'' = f` holds to spectral accuracy and `g(0) = g(1) = 0`.
pub fn inverse_a(f: &PeriodicGridFn) -> Result<PeriodicGridFn> {
    let mean = integrate(f);
    if mean.abs() > MEAN_ZERO_TOL {
        return Err(Error::NotMeanZero { mean });
    }
    let inner = spectral_antiderivative(&f.map(|v| v - mean));
    let outer = spectral_antiderivative(&inner);
    let total = integrate(&inner);
    let values = outer
        .values
        .iter()
        .enumerate()
        .map(|(j, g)| -g + f.grid.node(j) * total)
        .collect();
    Ok(PeriodicGridFn {
        grid: f.grid,
        values,
    })
}

/// `f - integrate(f)`.
pub fn mean_zero_project(f: &PeriodicGridFn) -> PeriodicGridFn {
    let mean = integrate(f);
    f.map(|v| v - mean)
}

/// `integrate(f^2)`, the squared `L^2(S)` norm.
pub fn l2_norm_sq(f: &PeriodicGridFn) -> f64 {
    f.values.iter().map(|v| v * v).sum::<f64>() / f.len() as f64
}

/// Discrete Fourier coefficient `(1/n) sum_j f(x_j) e^{-2 pi i k x_j}` for
/// each `k` in `0..m`.
pub fn fourier_coefficients(f: &PeriodicGridFn, m: usize) -> Vec<Complex64> {
    let n = f.len() as f64;
    forward(&f.values)
        .into_iter()
        .take(m)
        .map(|c| c / n)
        .collect()
}

/// Cubic Hermite interpolation on a cell of width `h` at fraction `s`.
pub fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to the physical coordinate.
pub fn hermite_slope(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

fn inverse(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut coeffs));
    coeffs.into_iter().map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    /// Adaptive Simpson on `[a, b]`, independent of the grid rules.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(PeriodicGrid::new(7).is_err());
        assert!(PeriodicGrid::new(6).is_err());
        assert!(PeriodicGrid::new(9).is_err());
        assert!(PeriodicGrid::new(8).is_ok());
    }

    #[test]
    fn grid_fn_rejects_bad_samples() {
        let g = grid(8);
        assert!(matches!(
            PeriodicGridFn::new(g, vec![0.0; 7]),
            Err(Error::LengthMismatch { expected: 8, got: 7 })
        ));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(PeriodicGridFn::new(g, v), Err(Error::NonFinite { index: 3 })));
    }

    #[test]
    fn integrate_examples() {
        for n in [8, 16, 64, 100] {
            assert_eq!(integrate(&PeriodicGridFn::constant(grid(n), 1.0)), 1.0);
        }
        let c = PeriodicGridFn::from_fn(grid(16), |x| (2.0 * PI * x).cos());
        assert!(integrate(&c).abs() < 1e-15);

        let integrand = |x: f64| 2.0 * (2.0 * PI * x).cos().powi(2);
        let oracle = adaptive_simpson(&integrand, 0.0, 1.0, 1e-14);
        assert!((oracle - 1.0).abs() < 1e-12);
        let value = integrate(&PeriodicGridFn::from_fn(grid(64), integrand));
        assert!((value - oracle).abs() < 1e-12);
    }

    #[test]
    fn cumulative_integral_examples() {
        let g = grid(32);
        let ones = cumulative_integral(&PeriodicGridFn::constant(g, 1.0));
        for (j, v) in ones.values().iter().enumerate() {
            assert!((v - g.node(j)).abs() < 1e-15);
        }
        assert_eq!(cumulative_integral(&PeriodicGridFn::zeros(g)).max_abs(), 0.0);
        let pyth = PeriodicGridFn::from_fn(g, |x| {
            (2.0 * PI * x).cos().powi(2) + (2.0 * PI * x).sin().powi(2)
        });
        let f = cumulative_integral(&pyth);
        for (j, v) in f.values().iter().enumerate() {
            assert!((v - g.node(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn cumulative_last_panel_closes_the_period() {
        let g = grid(48);
        let f = PeriodicGridFn::from_fn(g, |x| 1.3 + (2.0 * PI * x).sin() + 0.4 * (6.0 * PI * x).cos());
        let c = cumulative_integral(&f);
        let last = 0.5 * g.h() * (f[47] + f[0]);
        assert!((c[47] + last - integrate(&f)).abs() < 1e-14);
    }

    #[test]
    fn spectral_antiderivative_matches_analytic() {
        let g = grid(64);
        let f = PeriodicGridFn::from_fn(g, |x| 0.7 + (2.0 * PI * x).cos() + (6.0 * PI * x).sin());
        let exact = PeriodicGridFn::from_fn(g, |x| {
            0.7 * x + (2.0 * PI * x).sin() / (2.0 * PI) + (1.0 - (6.0 * PI * x).cos()) / (6.0 * PI)
        });
        assert!(spectral_antiderivative(&f).max_abs_diff(&exact) < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let g = grid(32);
        assert!(derivative(&PeriodicGridFn::constant(g, 3.5)).max_abs() < 1e-13);

        let s = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).sin());
        let ds = PeriodicGridFn::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x).cos());
        assert!(derivative(&s).max_abs_diff(&ds) <= 1e-10);

        let g = grid(64);
        let u = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).sin() / (2f64.sqrt() * PI));
        let du = PeriodicGridFn::from_fn(g, |x| 2f64.sqrt() * (2.0 * PI * x).cos());
        assert!(derivative(&u).max_abs_diff(&du) <= 1e-10);
    }

    #[test]
    fn centered_difference_is_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let s = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).sin());
            let ds = PeriodicGridFn::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x).cos());
            derivative_with(&s, DiffRule::CenteredDifference).max_abs_diff(&ds)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn inverse_a_examples() {
        let g = grid(64);
        assert!(inverse_a(&PeriodicGridFn::zeros(g)).unwrap().max_abs() == 0.0);

        let f = PeriodicGridFn::from_fn(g, |x| (2.0 * PI).powi(2) * (2.0 * PI * x).sin());
        let expected = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).sin());
        assert!(inverse_a(&f).unwrap().max_abs_diff(&expected) <= 1e-8);
    }

    #[test]
    fn inverse_a_pins_endpoints() {
        let g = grid(64);
        let f = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).cos() - 0.5 * (8.0 * PI * x).sin());
        let a = inverse_a(&f).unwrap();
        assert!(a[0].abs() < 1e-15);
        // g(0) = 0 fixes the additive constant
        let exact = PeriodicGridFn::from_fn(g, |x| {
            ((2.0 * PI * x).cos() - 1.0) / (2.0 * PI).powi(2) - 0.5 * (8.0 * PI * x).sin() / (8.0 * PI).powi(2)
        });
        assert!(a.max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn inverse_a_rejects_nonzero_mean() {
        let g = grid(16);
        let f = PeriodicGridFn::constant(g, 1e-6);
        assert!(matches!(inverse_a(&f), Err(Error::NotMeanZero { .. })));
    }

    #[test]
    fn mean_zero_and_norm_examples() {
        let g = grid(64);
        assert_eq!(mean_zero_project(&PeriodicGridFn::constant(g, 5.0)).max_abs(), 0.0);
        let f = PeriodicGridFn::from_fn(g, |x| 1.0 + (2.0 * PI * x).cos());
        let c = PeriodicGridFn::from_fn(g, |x| (2.0 * PI * x).cos());
        assert!(mean_zero_project(&f).max_abs_diff(&c) < 1e-15);

        assert_eq!(l2_norm_sq(&PeriodicGridFn::constant(g, 2.0)), 4.0);
        assert_eq!(l2_norm_sq(&PeriodicGridFn::zeros(g)), 0.0);
        let r = PeriodicGridFn::from_fn(g, |x| 2f64.sqrt() * (2.0 * PI * x).cos());
        assert!((l2_norm_sq(&r) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 0.3 - x + 2.0 * x * x - 0.7 * x * x * x;
        let dp = |x: f64| -1.0 + 4.0 * x - 2.1 * x * x;
        let (a, b) = (0.2, 0.45);
        for s in [0.0, 0.1, 0.5, 0.93, 1.0] {
            let x = a + s * (b - a);
            let v = hermite(p(a), p(b), dp(a), dp(b), b - a, s);
            let d = hermite_slope(p(a), p(b), dp(a), dp(b), b - a, s);
            assert!((v - p(x)).abs() < 1e-14);
            assert!((d - dp(x)).abs() < 1e-13);
        }
    }

    fn band_limited(n: usize, coeffs: &[(f64, f64)]) -> PeriodicGridFn {
        PeriodicGridFn::from_fn(grid(n), |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = 2.0 * PI * (k + 1) as f64 * x;
                    a * w.cos() + b * w.sin()
                })
                .sum()
        })
    }

    proptest! {
        #[test]
        fn project_is_idempotent(vals in prop::collection::vec(-10.0f64..10.0, 32)) {
            let f = PeriodicGridFn::new(grid(32), vals).unwrap();
            let once = mean_zero_project(&f);
            let twice = mean_zero_project(&once);
            prop_assert!(once.max_abs_diff(&twice) < 1e-13);
        }

        #[test]
        fn integrate_is_linear(
            a in prop::collection::vec(-5.0f64..5.0, 16),
            b in prop::collection::vec(-5.0f64..5.0, 16),
            s in -3.0f64..3.0,
        ) {
            let fa = PeriodicGridFn::new(grid(16), a).unwrap();
            let fb = PeriodicGridFn::new(grid(16), b).unwrap();
            let combo = fa.zip_with(&fb, |x, y| s * x + y);
            prop_assert!((integrate(&combo) - (s * integrate(&fa) + integrate(&fb))).abs() < 1e-12);
        }

        #[test]
        fn minus_second_derivative_inverts_a(
            coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..12)
        ) {
            let f = band_limited(64, &coeffs);
            let g = inverse_a(&f).unwrap();
            let back = derivative(&derivative(&g)).map(|v| -v);
            prop_assert!(back.max_abs_diff(&f) <= 1e-8);
        }

        #[test]
        fn spectral_derivative_is_exact_on_band_limited(
            coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20)
        ) {
            let f = band_limited(64, &coeffs);
            let exact = PeriodicGridFn::from_fn(grid(64), |x| {
                coeffs.iter().enumerate().map(|(k, (a, b))| {
                    let kk = 2.0 * PI * (k + 1) as f64;
                    kk * (-a * (kk * x).sin() + b * (kk * x).cos())
                }).sum()
            });
            prop_assert!(derivative(&f).max_abs_diff(&exact) <= 1e-10);
        }

        #[test]
        fn trapezoid_cumulative_is_monotone_for_nonnegative(
            vals in prop::collection::vec(0.0f64..4.0, 16)
        ) {
            let f = PeriodicGridFn::new(grid(16), vals).unwrap();
            let c = cumulative_integral(&f);
            prop_assert!(c.values().windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
