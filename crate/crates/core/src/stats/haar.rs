//! Haar-distributed orthogonal matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::Stream;
use crate::error::{Error, Result};

/// An orthogonal matrix together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalSample {
    matrix: DMatrix<f64>,
    det: f64,
    /// `(stream seed, counter)` when drawn from a [`Stream`].
    provenance: Option<(u64, u64)>,
}

impl OrthogonalSample {
    /// Wraps a matrix after checking `‖UᵀU − I‖_max ≤ 1e-12`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidParameter {
                name: "U",
                reason: format!("need a square matrix of size >= 2, got {}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let defect = orthogonality_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "U",
                reason: format!("not orthogonal: max |U^T U - I| = {defect:e}"),
            });
        }
        let det = matrix.determinant().signum();
        Ok(Self {
            matrix,
            det,
            provenance: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            det: 1.0,
            provenance: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `±1`.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn provenance(&self) -> Option<(u64, u64)> {
        self.provenance
    }

    /// `U e_i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.matrix.column(i).iter().copied().collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.matrix[(r, c)] * v[c]).sum())
            .collect()
    }

    /// `V·U`.
    pub fn compose(&self, other: &Self) -> Self {
        let matrix = &self.matrix * &other.matrix;
        Self {
            det: self.det * other.det,
            matrix,
            provenance: None,
        }
    }

    /// Spectral norm `‖U − I‖`.
    pub fn distance_to_identity(&self) -> f64 {
        let d = &self.matrix - DMatrix::<f64>::identity(self.dim(), self.dim());
        d.singular_values().max()
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.matrix)
    }
}

fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let n = m.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Gaussian matrix, QR with `diag(R) > 0`, then a fair coin flips the last
/// column.
pub fn sample_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalSample> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need n >= 2, got {n}"),
        });
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rng.random::<bool>() {
        q.column_mut(n - 1).neg_mut();
    }
    let det = q.determinant().signum();
    Ok(OrthogonalSample {
        matrix: q,
        det,
        provenance: None,
    })
}

/// Sample `index` of a counter-based Haar stream.
pub fn haar_at(n: usize, stream: &Stream, index: u64) -> Result<OrthogonalSample> {
    let mut rng = stream.rng(index);
    let mut u = sample_haar(n, &mut rng)?;
    u.provenance = Some((stream.seed(), index));
    Ok(u)
}
