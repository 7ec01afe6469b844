//! Fixtures shared by the benchmarks.

use varmem_core::{InnovationModel, MemoryFunction, ProcessSpec, SpaceGrid};

/// Constant memory `d` with Wiener innovations on `q` equally weighted points in `(0, 1]`.
pub fn wiener_spec(d: f64, q: usize, tail_tol: f64) -> ProcessSpec {
    let grid = SpaceGrid::with_probability_weights((1..=q).map(|i| i as f64 / q as f64).collect())
        .expect("valid grid");
    ProcessSpec::new(
        grid.clone(),
        MemoryFunction::constant(&grid, d).expect("valid memory"),
        InnovationModel::wiener(&grid).expect("valid innovations"),
        tail_tol,
        1,
    )
    .expect("valid spec")
}
