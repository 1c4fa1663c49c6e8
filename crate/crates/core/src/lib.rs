pub mod circle_calculus;
pub mod error;
pub mod datum;
pub mod lagrangian;
pub mod weak_flow;
pub mod geodesic_validator;
pub mod cli;
