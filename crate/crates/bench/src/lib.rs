//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use mfkg_core::{make_grid, CouplingProfile, Grid, Model, PolynomialPotential};

/// Gaussian coupling and `U(r) = -r + r^2` on a `dim`-dimensional grid.
pub fn model(dim: usize, n: usize, length: f64) -> Model {
    let grid: Arc<Grid> = make_grid(dim, n, length).expect("valid grid");
    Model::new(
        1.0,
        CouplingProfile::gaussian(grid, 1.0, 1.0).expect("valid coupling"),
        PolynomialPotential::new(vec![-1.0, 1.0]).expect("valid potential"),
    )
    .expect("valid model")
}
