use crate::circle_calculus::{derivative, integrate, spectral_antiderivative, PeriodicGridFn};

/// Both components of the Christoffel operator at the identity.
#[derive(Clone, Debug)]
pub struct ChristoffelValue {
    pub first: PeriodicGridFn,
    pub second: PeriodicGridFn,
}

/// Diagonal `Gamma((u, rho), (u, rho))` with `u_x` by Fourier collocation.
pub fn christoffel_diag(u: &PeriodicGridFn, rho: &PeriodicGridFn) -> ChristoffelValue {
    christoffel_diag_with(u, &derivative(u), rho)
}

/// Diagonal form with `u_x` supplied by the caller.
///
/// `first = (1/2) int_0^x (u_x^2 + rho^2) - (x/2) int_S (u_x^2 + rho^2)` and
/// `second = -(u rho)_x`.
pub fn christoffel_diag_with(
    u: &PeriodicGridFn,
    ux: &PeriodicGridFn,
    rho: &PeriodicGridFn,
) -> ChristoffelValue {
    let density = ux.zip_with(rho, |a, b| a * a + b * b);
    let total = integrate(&density);
    let running = spectral_antiderivative(&density);
    let grid = u.grid();
    let first = PeriodicGridFn::new(
        grid,
        (0..grid.n())
            .map(|j| 0.5 * running[j] - 0.5 * grid.node(j) * total)
            .collect(),
    )
    .expect("finite");
    let second = derivative(&u.zip_with(rho, |a, b| a * b)).map(|v| -v);
    ChristoffelValue { first, second }
}

/// Symmetric bilinear form. The first slot polarizes the diagonal,
/// `(D(u+v, rho+sigma) - D(u-v, rho-sigma)).first / 4`; the second slot is
/// `-(u_x sigma + v_x rho)/2`.
pub fn christoffel_bilinear(
    u: &PeriodicGridFn,
    rho: &PeriodicGridFn,
    v: &PeriodicGridFn,
    sigma: &PeriodicGridFn,
) -> ChristoffelValue {
    let plus = christoffel_diag(&u.zip_with(v, |a, b| a + b), &rho.zip_with(sigma, |a, b| a + b));
    let minus = christoffel_diag(&u.zip_with(v, |a, b| a - b), &rho.zip_with(sigma, |a, b| a - b));
    let first = plus.first.zip_with(&minus.first, |p, m| 0.25 * (p - m));
    let ux = derivative(u);
    let vx = derivative(v);
    let grid = u.grid();
    let second = PeriodicGridFn::new(
        grid,
        (0..grid.n())
            .map(|j| -0.5 * (ux[j] * sigma[j] + vx[j] * rho[j]))
            .collect(),
    )
    .expect("finite");
    ChristoffelValue { first, second }
}
