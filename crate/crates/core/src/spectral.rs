//! Periodic grids, discrete Fourier transforms and dealiased products.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * grid points are `x_j = j L / N` per axis, so the box is `[0, L)^n`;
//! * storage is row-major with the last axis fastest;
//! * the forward transform is `c_k = N^{-n} sum_x f(x) e^{-i k.x}`, the
//!   inverse is the unscaled sum `f(x) = sum_k c_k e^{i k.x}`;
//! * lattice index `j` along an axis carries the signed wavenumber `j` for
//!   `j < N/2` and `j - N` otherwise, and the frequency is that integer times
//!   `d0 = 2 pi / L`.
//!
//! With this normalization `||f||_2 = L^{n/2} ||c||_{l2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Number of strided lines gathered into one contiguous batch.
const LINE_BATCH: usize = 16;

/// A periodic box `[0, L)^n` sampled at `N` points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    size: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, size: usize, length: f64) -> Result<Self> {
        if dim < 2 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must lie in 2..={MAX_DIM}, got {dim}"
            )));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be a power of two >= 8, got {size}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        size.checked_pow(dim as u32)
            .filter(|&total| total <= 1 << 30)
            .ok_or_else(|| Error::InvalidGrid(format!("{size}^{dim} points is too many")))?;
        Ok(Self { dim, size, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice spacing in frequency, `2 pi / L`.
    pub fn cell(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Physical spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.size as f64
    }

    /// Largest representable frequency magnitude per axis, `pi N / L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.size as f64 / self.length
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Same box, `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.size * factor, self.length)
    }

    /// Signed wavenumber of axis index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        signed(j, self.size)
    }

    /// Signed lattice vector of the coefficient stored at `flat`.
    pub fn lattice_index(&self, flat: usize, out: &mut [i64]) {
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = signed(rest % self.size, self.size);
            rest /= self.size;
        }
    }

    /// Storage position of the lattice vector `k`, if it is representable.
    pub fn flat_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let half = (self.size / 2) as i64;
        let mut flat = 0usize;
        for &ki in k {
            if ki < -half || ki >= half {
                return None;
            }
            flat = flat * self.size + ki.rem_euclid(self.size as i64) as usize;
        }
        Some(flat)
    }

    /// Physical frequency of the coefficient stored at `flat`.
    pub fn frequency(&self, flat: usize, out: &mut [f64]) {
        let d0 = self.cell();
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = signed(rest % self.size, self.size) as f64 * d0;
            rest /= self.size;
        }
    }

    /// Physical coordinates of grid point `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = (rest % self.size) as f64 * h;
            rest /= self.size;
        }
    }

    /// Evaluates `f` at every lattice frequency, in storage order.
    pub fn map_frequencies<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|flat| {
                let mut xi = [0.0; MAX_DIM];
                self.frequency(flat, &mut xi[..self.dim]);
                f(&xi[..self.dim])
            })
            .collect()
    }

    /// Evaluates `f` at every grid point, in storage order.
    pub fn map_points<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|flat| {
                let mut x = [0.0; MAX_DIM];
                self.point(flat, &mut x[..self.dim]);
                f(&x[..self.dim])
            })
            .collect()
    }

    /// Rounds a physical frequency to lattice units; `None` if it is more
    /// than `tol` cells away from the lattice or outside the representable box.
    pub fn snap_frequency(&self, xi: &[f64], tol: f64) -> Option<Vec<i64>> {
        if xi.len() != self.dim {
            return None;
        }
        let d0 = self.cell();
        let k: Vec<i64> = xi.iter().map(|v| (v / d0).round() as i64).collect();
        let off = xi
            .iter()
            .zip(&k)
            .map(|(v, &ki)| (v / d0 - ki as f64).abs())
            .fold(0.0, f64::max);
        (off <= tol && self.flat_index(&k).is_some()).then_some(k)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn signed(j: usize, size: usize) -> i64 {
    if j < size / 2 {
        j as i64
    } else {
        j as i64 - size as i64
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: PeriodicGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("expected {} samples, got {}", grid.len(), values.len()),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: PeriodicGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: &PeriodicGrid, c: Complex64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the grid points.
    pub fn from_fn<F>(grid: &PeriodicGrid, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        Self {
            grid: grid.clone(),
            values: grid.map_points(f),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        Self {
            grid: self.grid.clone(),
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; a plain (aliasing) product when used for `*`.
    pub fn zip_map<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .par_iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    /// Riemann sum of the samples over the box.
    pub fn integral(&self) -> Complex64 {
        let cell = self.grid.spacing().powi(self.grid.dim() as i32);
        self.values.iter().sum::<Complex64>() * cell
    }
}

/// Fourier coefficients on the frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: format!("expected {} coefficients, got {}", grid.len(), coeffs.len()),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Single coefficient `c` at lattice vector `k`.
    pub fn mode(grid: &PeriodicGrid, k: &[i64], c: Complex64) -> Result<Self> {
        let flat = grid.flat_index(k).ok_or_else(|| {
            Error::OffLattice(k.iter().map(|&v| v as f64 * grid.cell()).collect())
        })?;
        let mut out = Self::zeros(grid);
        out.coeffs[flat] = c;
        Ok(out)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coefficient(&self, k: &[i64]) -> Option<Complex64> {
        self.grid.flat_index(k).map(|flat| self.coeffs[flat])
    }

    /// Multiplies every coefficient by `m(xi)`.
    pub fn apply_multiplier<F>(&self, m: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let grid = &self.grid;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(flat, &c)| {
                let mut xi = [0.0; MAX_DIM];
                grid.frequency(flat, &mut xi[..grid.dim()]);
                c * m(&xi[..grid.dim()])
            })
            .collect();
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Multiplies coefficient-wise by a precomputed table.
    pub fn scale_by(&self, table: &[f64]) -> Self {
        debug_assert_eq!(table.len(), self.coeffs.len());
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .par_iter()
                .zip(table)
                .map(|(&c, &w)| c * w)
                .collect(),
        }
    }

    /// Keeps the coefficients where `keep` is true.
    pub fn masked(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.coeffs.len());
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(keep)
                .map(|(&c, &k)| if k { c } else { Complex64::new(0.0, 0.0) })
                .collect(),
        }
    }

    pub fn zip_map<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .par_iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&v| v * c).collect(),
        }
    }

    /// Physical L2 norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.grid.volume().sqrt() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Weighted norm `L^{n/2} (sum w^2 |c|^2)^{1/2}`.
    pub fn weighted_l2(&self, weight: &[f64]) -> f64 {
        debug_assert_eq!(weight.len(), self.coeffs.len());
        let s: f64 = self
            .coeffs
            .iter()
            .zip(weight)
            .map(|(c, w)| w * w * c.norm_sqr())
            .sum();
        self.grid.volume().sqrt() * s.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

/// In-place n-dimensional FFT on a cubic array of side `size`.
fn transform_raw(dim: usize, size: usize, data: &mut [Complex64], direction: FftDirection) {
    let fft = FftPlanner::new().plan_fft(size, direction);
    let scratch_len = fft.get_inplace_scratch_len();
    let zero = Complex64::new(0.0, 0.0);
    for axis in 0..dim {
        let stride = size.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(size * LINE_BATCH).for_each_init(
                || vec![zero; scratch_len],
                |scratch, lines| fft.process_with_scratch(lines, scratch),
            );
            continue;
        }
        let block = stride * size;
        let work = |blk: &mut [Complex64], buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
            for j0 in (0..stride).step_by(LINE_BATCH) {
                let g = LINE_BATCH.min(stride - j0);
                for k in 0..size {
                    let row = &blk[k * stride + j0..k * stride + j0 + g];
                    for (t, &v) in row.iter().enumerate() {
                        buf[t * size + k] = v;
                    }
                }
                fft.process_with_scratch(&mut buf[..g * size], scratch);
                for k in 0..size {
                    let row = &mut blk[k * stride + j0..k * stride + j0 + g];
                    for (t, v) in row.iter_mut().enumerate() {
                        *v = buf[t * size + k];
                    }
                }
            }
        };
        data.par_chunks_mut(block).for_each_init(
            || (vec![zero; LINE_BATCH * size], vec![zero; scratch_len]),
            |(buf, scratch), blk| work(blk, buf, scratch),
        );
    }
}

fn forward_raw(dim: usize, size: usize, data: &mut [Complex64]) {
    transform_raw(dim, size, data, FftDirection::Forward);
    let scale = 1.0 / (size as f64).powi(dim as i32);
    data.par_iter_mut().for_each(|v| *v *= scale);
}

fn inverse_raw(dim: usize, size: usize, data: &mut [Complex64]) {
    transform_raw(dim, size, data, FftDirection::Inverse);
}

/// Copies coefficients between lattices of different sizes, zero-padding or
/// truncating by signed wavenumber.
fn resample(dim: usize, src_size: usize, src: &[Complex64], dst_size: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); dst_size.pow(dim as u32)];
    let small = src_size.min(dst_size);
    let total = small.pow(dim as u32);
    for idx in 0..total {
        let mut rest = idx;
        let mut s = 0usize;
        let mut d = 0usize;
        let mut place = (1usize, 1usize);
        for _ in 0..dim {
            let k = signed(rest % small, small);
            rest /= small;
            s += k.rem_euclid(src_size as i64) as usize * place.0;
            d += k.rem_euclid(dst_size as i64) as usize * place.1;
            place = (place.0 * src_size, place.1 * dst_size);
        }
        dst[d] = src[s];
    }
    dst
}

/// Forward transform with the frozen normalization.
pub fn forward_transform(f: &Field) -> SpectralField {
    let mut data = f.values.clone();
    forward_raw(f.grid.dim, f.grid.size, &mut data);
    SpectralField {
        grid: f.grid.clone(),
        coeffs: data,
    }
}

/// Inverse transform (unscaled synthesis sum).
pub fn inverse_transform(g: &SpectralField) -> Field {
    let mut data = g.coeffs.clone();
    inverse_raw(g.grid.dim, g.grid.size, &mut data);
    Field {
        grid: g.grid.clone(),
        values: data,
    }
}

/// Spectral interpolation onto a finer grid over the same box.
pub fn refine(f: &SpectralField, fine: &PeriodicGrid) -> Result<SpectralField> {
    if fine.dim != f.grid.dim || fine.length != f.grid.length || fine.size < f.grid.size {
        return Err(Error::GridMismatch);
    }
    Ok(SpectralField {
        grid: fine.clone(),
        coeffs: resample(f.grid.dim, f.grid.size, &f.coeffs, fine.size),
    })
}

/// Truncation of a fine-grid spectrum onto a coarser grid.
pub fn truncate(f: &SpectralField, coarse: &PeriodicGrid) -> Result<SpectralField> {
    if coarse.dim != f.grid.dim || coarse.length != f.grid.length || coarse.size > f.grid.size {
        return Err(Error::GridMismatch);
    }
    Ok(SpectralField {
        grid: coarse.clone(),
        coeffs: resample(f.grid.dim, f.grid.size, &f.coeffs, coarse.size),
    })
}

/// Riemann-sum `L^p` norm; `p = inf` gives the max modulus.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need p >= 1, got {p}"),
        });
    }
    let top = f.max_abs();
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    let s: f64 = f.values.iter().map(|v| (v.norm() / top).powf(p)).sum();
    let cell = f.grid.spacing().powi(f.grid.dim as i32);
    Ok(top * (cell * s).powf(1.0 / p))
}

/// Multiplication by a fixed field, evaluated on the 3/2-padded grid and
/// truncated back, so spectrally band-limited inputs never alias.
#[derive(Debug, Clone)]
pub struct PaddedMultiplier {
    grid: PeriodicGrid,
    padded: usize,
    values: Vec<Complex64>,
}

impl PaddedMultiplier {
    pub fn new(m: &Field) -> Self {
        Self::from_spectrum(&forward_transform(m))
    }

    pub fn from_spectrum(m: &SpectralField) -> Self {
        let grid = m.grid.clone();
        let padded = grid.size * 3 / 2;
        let mut values = resample(grid.dim, grid.size, &m.coeffs, padded);
        inverse_raw(grid.dim, padded, &mut values);
        Self {
            grid,
            padded,
            values,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Largest modulus of the multiplier on the padded grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Truncated spectrum of `m * u`.
    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&u.grid)?;
        let dim = self.grid.dim;
        let mut work = resample(dim, self.grid.size, &u.coeffs, self.padded);
        inverse_raw(dim, self.padded, &mut work);
        work.par_iter_mut()
            .zip(&self.values)
            .for_each(|(w, &m)| *w *= m);
        forward_raw(dim, self.padded, &mut work);
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs: resample(dim, self.padded, &work, self.grid.size),
        })
    }

    /// Same as [`apply`](Self::apply) with the conjugate multiplier.
    pub fn apply_conj(&self, u: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&u.grid)?;
        let dim = self.grid.dim;
        let mut work = resample(dim, self.grid.size, &u.coeffs, self.padded);
        inverse_raw(dim, self.padded, &mut work);
        work.par_iter_mut()
            .zip(&self.values)
            .for_each(|(w, &m)| *w *= m.conj());
        forward_raw(dim, self.padded, &mut work);
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs: resample(dim, self.padded, &work, self.grid.size),
        })
    }
}

/// Alias-free pointwise product truncated to the grid.
pub fn dealiased_product(f: &Field, g: &Field) -> Result<Field> {
    f.grid.check_same(&g.grid)?;
    let prod = PaddedMultiplier::new(f).apply(&forward_transform(g))?;
    Ok(inverse_transform(&prod))
}

/// Spectral version of [`dealiased_product`].
pub fn dealiased_product_spectral(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid.check_same(&g.grid)?;
    PaddedMultiplier::from_spectrum(f).apply(g)
}

/// Spectral partial derivative along `axis`.
pub fn partial(f: &SpectralField, axis: usize) -> SpectralField {
    f.apply_multiplier(|xi| Complex64::new(0.0, xi[axis]))
}

/// Spectral gradient of a physical field.
pub fn gradient(f: &Field) -> Vec<Field> {
    let fh = forward_transform(f);
    (0..f.grid.dim)
        .map(|axis| inverse_transform(&partial(&fh, axis)))
        .collect()
}

/// Spectral Laplacian of a physical field.
pub fn laplacian(f: &Field) -> Field {
    let fh = forward_transform(f);
    inverse_transform(&fh.apply_multiplier(|xi| {
        Complex64::new(-xi.iter().map(|v| v * v).sum::<f64>(), 0.0)
    }))
}

/// Spectral divergence of a vector field.
pub fn divergence(v: &[Field]) -> Result<Field> {
    let grid = v
        .first()
        .map(|f| f.grid.clone())
        .ok_or_else(|| Error::Precondition("empty vector field".into()))?;
    if v.len() != grid.dim {
        return Err(Error::Precondition(format!(
            "vector field has {} components in dimension {}",
            v.len(),
            grid.dim
        )));
    }
    let mut acc = SpectralField::zeros(&grid);
    for (axis, comp) in v.iter().enumerate() {
        grid.check_same(&comp.grid)?;
        acc = acc.add(&partial(&forward_transform(comp), axis))?;
    }
    Ok(inverse_transform(&acc))
}
