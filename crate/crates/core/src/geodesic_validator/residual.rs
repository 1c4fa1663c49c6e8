use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::circle_calculus::{derivative, PeriodicGridFn};
use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::lagrangian::flow_map;
use crate::weak_flow::{eulerian_point, EulerianPiece, EulerianPoint};

use super::christoffel::christoffel_diag_with;

/// Number of Fourier test modes `e_k`, `k = 0..m`.
pub const DEFAULT_MODES: usize = 8;
/// Smallest distance from a defect time at which residuals are evaluated.
pub const EXCLUSION_BAND: f64 = 1e-3;
/// Constant in the acceptance bound `max(RESIDUAL_FLOOR, RESIDUAL_C h^2)`.
pub const RESIDUAL_C: f64 = 10.0;
pub const RESIDUAL_FLOOR: f64 = 1e-5;

pub fn residual_threshold(h: f64) -> f64 {
    RESIDUAL_FLOOR.max(RESIDUAL_C * h * h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualOptions {
    pub modes: usize,
    pub exclusion: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            modes: DEFAULT_MODES,
            exclusion: EXCLUSION_BAND,
        }
    }
}

/// Weak residuals of `r1 = u_t + u u_x - G1` and `r2 = rho_t + (u rho)_x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub t: f64,
    pub h: f64,
    /// `|(1/n) sum_j r1(y_j) exp(-2 pi i k y_j)|` over unmasked nodes.
    pub r1_weak: Vec<f64>,
    pub r2_weak: Vec<f64>,
    pub r1_linf_unmasked: f64,
    pub mask_fraction: f64,
}

impl ResidualReport {
    pub fn max_weak(&self) -> f64 {
        self.r1_weak
            .iter()
            .chain(&self.r2_weak)
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn geodesic_residual(datum: &InitialDatum, t: f64, h: f64) -> Result<ResidualReport> {
    geodesic_residual_with(datum, t, h, ResidualOptions::default())
}

/// Evaluates the residuals at the grid nodes with `u_t`, `rho_t` from centered
/// differences of the weak solution at `t +- h`.
///
/// Nodes are masked when their preimage is flat at any of the three times or,
/// for structured data, when a piece boundary crosses them within the stencil.
/// Structured data use the exact piecewise `u`, `rho` and `G1`; sampled data
/// use the Hermite reconstruction and collocation derivatives.
pub fn geodesic_residual_with(
    datum: &InitialDatum,
    t: f64,
    h: f64,
    opts: ResidualOptions,
) -> Result<ResidualReport> {
    if !(1e-5..=1e-3).contains(&h) {
        return Err(Error::param("h", format!("{h} outside [1e-5, 1e-3]")));
    }
    if opts.modes == 0 {
        return Err(Error::param("modes", "must be positive"));
    }
    let (dist, defect) = datum.distance_to_defect(t, datum.default_zero_eps());
    if let Some(defect) = defect {
        if dist < opts.exclusion.max(2.0 * h) {
            return Err(Error::DefectTime { t, defect });
        }
    }

    let grid = datum.grid();
    let n = grid.n();
    let states = [flow_map(datum, t - h), flow_map(datum, t), flow_map(datum, t + h)];
    let points: Vec<[EulerianPoint; 3]> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = grid.node(j);
            [0, 1, 2].map(|i| eulerian_point(datum, &states[i], y))
        })
        .collect();
    let mask: Vec<bool> = points
        .iter()
        .map(|p| {
            p.iter().any(|q| q.masked) || p[0].piece != p[1].piece || p[1].piece != p[2].piece
        })
        .collect();

    let field = |f: &dyn Fn(&[EulerianPoint; 3]) -> f64| {
        PeriodicGridFn::new(grid, points.iter().map(f).collect()).expect("finite")
    };
    let u = field(&|p| p[1].u);
    let ux = field(&|p| p[1].ux);
    let rho = field(&|p| p[1].rho);
    let u_t = field(&|p| (p[2].u - p[0].u) / (2.0 * h));
    let rho_t = field(&|p| (p[2].rho - p[0].rho) / (2.0 * h));

    let (g1, rho_y) = match states[1].pieces() {
        Some(ps) => {
            let pieces: Vec<EulerianPiece> =
                ps.iter().map(EulerianPiece::from_state).collect();
            let g1 = PeriodicGridFn::new(
                grid,
                grid.nodes().map(|y| piecewise_gamma1(&pieces, y)).collect(),
            )
            .expect("finite");
            (g1, PeriodicGridFn::zeros(grid))
        }
        None => (christoffel_diag_with(&u, &ux, &rho).first, derivative(&rho)),
    };

    let r1: Vec<f64> = (0..n).map(|j| u_t[j] + u[j] * ux[j] - g1[j]).collect();
    let r2: Vec<f64> = (0..n)
        .map(|j| rho_t[j] + ux[j] * rho[j] + u[j] * rho_y[j])
        .collect();

    let project = |r: &[f64]| -> Vec<f64> {
        (0..opts.modes)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for j in (0..n).filter(|&j| !mask[j]) {
                    let (s, c) = (TAU * k as f64 * grid.node(j)).sin_cos();
                    re += r[j] * c;
                    im -= r[j] * s;
                }
                re.hypot(im) / n as f64
            })
            .collect()
    };
    let r1_linf_unmasked = (0..n)
        .filter(|&j| !mask[j])
        .map(|j| r1[j].abs())
        .fold(0.0, f64::max);

    Ok(ResidualReport {
        t,
        h,
        r1_weak: project(&r1),
        r2_weak: project(&r2),
        r1_linf_unmasked,
        mask_fraction: mask.iter().filter(|&&m| m).count() as f64 / n as f64,
    })
}

/// `G1(y)` for a piecewise-affine `u` with piecewise-constant `rho`.
pub(crate) fn piecewise_gamma1(pieces: &[EulerianPiece], y: f64) -> f64 {
    let total: f64 = pieces.iter().map(EulerianPiece::energy).sum();
    let mut below = 0.0;
    for p in pieces.iter().filter(|p| !p.flat) {
        if y >= p.y_end {
            below += p.energy();
        } else {
            if y > p.y_start {
                below += (p.ux * p.ux + p.rho * p.rho) * (y - p.y_start);
            }
            break;
        }
    }
    0.5 * below - 0.5 * y * total
}
