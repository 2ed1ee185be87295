//! Grids on `S^n` and the pulled-back Wulff geometry on them.

mod chart;
mod grid;

pub use chart::{analytic_axisymmetric_faces, ChartNode, WulffChart};
pub use grid::{CoordDerivs, GridMode, SphereGrid, StencilOrder, MIN_N_PHI, MIN_N_THETA};
