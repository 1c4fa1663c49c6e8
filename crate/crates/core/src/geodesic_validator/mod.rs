//! Checks of the weak geodesic equation.
//!
//! In Eulerian variables the geodesic equation reads
//! `u_t + u u_x = G1(u, rho)` and `rho_t + (u rho)_x = 0`, with
//! `G1 = (1/2) int_0^x (u_x^2 + rho^2) - (x/2) int_S (u_x^2 + rho^2)`.

mod audit;
mod christoffel;
mod oracle;
mod residual;

pub use audit::{weak_solution_audit, AuditOptions, AuditReport, ConditionResult, TimeAudit};
pub use christoffel::{
    christoffel_bilinear, christoffel_diag, christoffel_diag_with, ChristoffelValue,
};
pub use oracle::{oracle_run, oracle_solve, OracleRun, ENERGY_DRIFT_GUARD, UX_GUARD};
pub use residual::{
    geodesic_residual, geodesic_residual_with, residual_threshold, ResidualOptions,
    ResidualReport, DEFAULT_MODES, EXCLUSION_BAND, RESIDUAL_C, RESIDUAL_FLOOR,
};
