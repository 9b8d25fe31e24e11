//! Shared inputs for the benchmarks.

use std::f64::consts::PI;

use cgolab_core::cgo::{box_centre, gaussian};
use cgolab_core::phase::PhaseVector;
use cgolab_core::{Field, PeriodicGrid};

pub fn grid(size: usize) -> PeriodicGrid {
    PeriodicGrid::new(3, size, 2.0 * PI).expect("valid grid")
}

/// Smooth potential centred in the box.
pub fn potential(grid: &PeriodicGrid) -> Field {
    gaussian(grid, &box_centre(grid), 1.0, 0.7)
}

pub fn phase(tau: f64) -> PhaseVector {
    PhaseVector::new(tau, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).expect("orthonormal frame")
}
