//! Problem parameters, the truncated cylinder grid and the quotient.

pub mod field;
pub mod grid;
pub mod params;

pub use field::{evaluate_norms, evaluate_q, Field, Norms};
pub use grid::{build_grid, default_half_length, CylinderGrid};
pub use params::{sphere_area, theta_critical, MeasureMode, ProblemParams};
