//! Phase vectors, the conjugated-Laplacian symbol and frequency projections.
//!
//! For `ζ = τ(e₁ − i e₂)` the operator `Δ + 2ζ·∇` has symbol
//! `p_ζ(ξ) = −|ξ|² + 2iζ·ξ`, which vanishes on the codimension-two sphere
//! `Σ_ζ = {ξ·e₁ = 0, |ξ − τe₂| = τ}`. Distances to `Σ_ζ` are measured
//! exactly and bucketed dyadically in units of one lattice cell.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{PeriodicGrid, SpectralField, MAX_DIM};

const ORTHO_TOL: f64 = 1e-12;
const NULL_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A complex null vector `ζ = Re ζ + i Im ζ` with `ζ·ζ = 0`, carried together
/// with its frame `τ = |Re ζ|`, `e₁ = Re ζ/τ`, `e₂ = −Im ζ/|Im ζ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    tau: f64,
    e1: Vec<f64>,
    e2: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl PhaseVector {
    /// `ζ = τ(e₁ − i e₂)` for an orthonormal pair.
    pub fn new(tau: f64, e1: Vec<f64>, e2: Vec<f64>) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be positive, got {tau}"),
            });
        }
        if e1.len() != e2.len() || e1.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "frame",
                reason: "e1 and e2 must share a dimension >= 2".into(),
            });
        }
        let defect = (norm(&e1) - 1.0)
            .abs()
            .max((norm(&e2) - 1.0).abs())
            .max(dot(&e1, &e2).abs());
        if defect > ORTHO_TOL {
            return Err(Error::InvalidParameter {
                name: "frame",
                reason: format!("not orthonormal (defect {defect:e})"),
            });
        }
        let re = e1.iter().map(|v| tau * v).collect();
        let im = e2.iter().map(|v| -tau * v).collect();
        Ok(Self { tau, e1, e2, re, im })
    }

    /// Builds a phase vector from its real and imaginary parts, rejecting
    /// vectors that are not null to `1e-12` relative.
    pub fn from_parts(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() || re.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: "real and imaginary parts must share a dimension >= 2".into(),
            });
        }
        let (a, b) = (norm(&re), norm(&im));
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: "real part must be non-zero".into(),
            });
        }
        let defect = ((a * a - b * b).abs() + 2.0 * dot(&re, &im).abs()) / (a * a);
        if defect > NULL_TOL {
            return Err(Error::NotNull(defect));
        }
        let e1 = re.iter().map(|v| v / a).collect();
        let e2 = im.iter().map(|v| -v / b).collect();
        Ok(Self {
            tau: a,
            e1,
            e2,
            re,
            im,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.re.len()
    }

    pub fn e1(&self) -> &[f64] {
        &self.e1
    }

    pub fn e2(&self) -> &[f64] {
        &self.e2
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    /// Relative size of the unconjugated square `|ζ·ζ|/τ²`.
    pub fn null_defect(&self) -> f64 {
        let zz = Complex64::new(
            dot(&self.re, &self.re) - dot(&self.im, &self.im),
            2.0 * dot(&self.re, &self.im),
        );
        zz.norm() / (self.tau * self.tau)
    }

    /// Euclidean distance `|ζ − ζ̃|` in `ℂⁿ`.
    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        s.sqrt()
    }

    /// `−ζ`.
    pub fn negated(&self) -> Self {
        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        Self {
            tau: self.tau,
            e1: flip(&self.e1),
            e2: flip(&self.e2),
            re: flip(&self.re),
            im: flip(&self.im),
        }
    }
}

impl fmt::Display for PhaseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (a, b)) in self.re.iter().zip(&self.im).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a:.6}{b:+.6}i")?;
        }
        write!(f, ")")
    }
}

/// `p_ζ(ξ) = −|ξ|² + 2iζ·ξ`.
pub fn symbol_p(zeta: &PhaseVector, xi: &[f64]) -> Complex64 {
    Complex64::new(
        -dot(xi, xi) - 2.0 * dot(&zeta.im, xi),
        2.0 * dot(&zeta.re, xi),
    )
}

/// Exact Euclidean distance from `ξ` to `Σ_ζ`.
pub fn modulation(zeta: &PhaseVector, xi: &[f64]) -> f64 {
    let tau = zeta.tau;
    let x1 = dot(xi, &zeta.e1);
    let x2 = dot(xi, &zeta.e2);
    let perp_sq = dot(xi, xi) - x1 * x1 - 2.0 * tau * x2 + tau * tau;
    let r = perp_sq.max(0.0).sqrt();
    (x1 * x1 + (r - tau) * (r - tau)).sqrt()
}

/// Floored weight `max(|p_ζ(ξ)|, τ d₀ floor_cells)`.
pub fn symbol_weight(zeta: &PhaseVector, xi: &[f64], floor_cells: f64, grid: &PeriodicGrid) -> f64 {
    symbol_p(zeta, xi)
        .norm()
        .max(zeta.tau * grid.cell() * floor_cells)
}

/// A dyadic integer `2^k`, `k ≥ 0`. The index 1 stands for the collapsed
/// band of everything within one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicIndex(u64);

impl DyadicIndex {
    pub fn new(lambda: u64) -> Result<Self> {
        if lambda == 0 || !lambda.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("{lambda} is not a dyadic integer"),
            });
        }
        Ok(Self(lambda))
    }

    pub fn from_exponent(k: u32) -> Self {
        Self(1 << k)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Smallest dyadic `λ ≥ max(t, 1)`.
    pub fn covering(t: f64) -> Self {
        let mut lambda = 1u64;
        while (lambda as f64) < t && lambda < 1 << 62 {
            lambda <<= 1;
        }
        Self(lambda)
    }
}

/// Modulation band selector for `Q` projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// `E_λ`: modulation in `(λ/2, λ]` cells (`E₁` is everything within one cell).
    Exact(DyadicIndex),
    /// Union of `E_μ` for `μ ≤ λ`.
    AtMost(DyadicIndex),
    /// Union of `E_λ` with `λ d₀ ≤ τ/8`.
    Low,
    /// Complement of [`Band::Low`].
    High,
}

/// Largest dyadic band counted as low modulation, if any.
pub fn low_band_limit(tau: f64, cell: f64) -> Option<DyadicIndex> {
    let top = tau / (8.0 * cell);
    if top < 1.0 {
        return None;
    }
    let mut lambda = 1u64;
    while ((lambda << 1) as f64) <= top {
        lambda <<= 1;
    }
    Some(DyadicIndex(lambda))
}

fn band_contains(band: Band, index: DyadicIndex, low: Option<DyadicIndex>) -> bool {
    match band {
        Band::Exact(l) => index == l,
        Band::AtMost(l) => index <= l,
        Band::Low => low.is_some_and(|l| index <= l),
        Band::High => !low.is_some_and(|l| index <= l),
    }
}

/// Per-ζ tables of the symbol, modulation and floored weight on a grid.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    grid: PeriodicGrid,
    zeta: PhaseVector,
    floor_cells: f64,
    symbol: Vec<Complex64>,
    modulation: Vec<f64>,
    weight: Vec<f64>,
}

impl SymbolTable {
    pub fn new(grid: &PeriodicGrid, zeta: &PhaseVector, floor_cells: f64) -> Result<Self> {
        if zeta.dim() != grid.dim() {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: format!("dimension {} on a {}-dimensional grid", zeta.dim(), grid.dim()),
            });
        }
        if !(floor_cells >= 1.0 && floor_cells.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "floor_cells",
                reason: format!("must be >= 1, got {floor_cells}"),
            });
        }
        let floor = zeta.tau * grid.cell() * floor_cells;
        let both: Vec<(Complex64, f64)> =
            grid.map_frequencies(|xi| (symbol_p(zeta, xi), modulation(zeta, xi)));
        let (symbol, modulation): (Vec<_>, Vec<_>) = both.into_iter().unzip();
        let weight = symbol.iter().map(|p| p.norm().max(floor)).collect();
        Ok(Self {
            grid: grid.clone(),
            zeta: zeta.clone(),
            floor_cells,
            symbol,
            modulation,
            weight,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn zeta(&self) -> &PhaseVector {
        &self.zeta
    }

    pub fn floor_cells(&self) -> f64 {
        self.floor_cells
    }

    /// The floor value `τ d₀ floor_cells`.
    pub fn floor(&self) -> f64 {
        self.zeta.tau * self.grid.cell() * self.floor_cells
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    /// Physical modulation at every lattice frequency.
    pub fn modulation(&self) -> &[f64] {
        &self.modulation
    }

    /// Floored weight at every lattice frequency.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// `w^b` (homogeneous) or `(|p| + τ)^b` (inhomogeneous).
    pub fn weight_power(&self, b: f64, homogeneous: bool) -> Vec<f64> {
        if homogeneous {
            self.weight.iter().map(|w| w.powf(b)).collect()
        } else {
            let tau = self.zeta.tau;
            self.symbol.iter().map(|p| (p.norm() + tau).powf(b)).collect()
        }
    }

    /// Frequencies where the floor replaces `|p_ζ|`.
    pub fn floored(&self) -> Vec<bool> {
        let floor = self.floor();
        self.symbol.iter().map(|p| p.norm() < floor).collect()
    }

    pub fn band_index(&self, flat: usize) -> DyadicIndex {
        DyadicIndex::covering(self.modulation[flat] / self.grid.cell())
    }

    pub fn band_mask(&self, band: Band) -> Vec<bool> {
        let low = low_band_limit(self.zeta.tau, self.grid.cell());
        (0..self.modulation.len())
            .map(|flat| band_contains(band, self.band_index(flat), low))
            .collect()
    }

    /// Sharp modulation projection.
    pub fn project(&self, f: &SpectralField, band: Band) -> Result<SpectralField> {
        self.grid.check_same(f.grid())?;
        Ok(f.masked(&self.band_mask(band)))
    }
}

/// Sharp projection onto a modulation band of `ζ`.
pub fn q_projection(f: &SpectralField, zeta: &PhaseVector, band: Band) -> Result<SpectralField> {
    let grid = f.grid();
    if zeta.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let d0 = grid.cell();
    let low = low_band_limit(zeta.tau, d0);
    let keep = grid.map_frequencies(|xi| {
        band_contains(band, DyadicIndex::covering(modulation(zeta, xi) / d0), low)
    });
    Ok(f.masked(&keep))
}

fn smooth_tail(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (at `t ≤ 0`) to 1 (at `t ≥ 1`).
pub fn smooth_step(t: f64) -> f64 {
    let a = smooth_tail(t);
    let b = smooth_tail(1.0 - t);
    a / (a + b)
}

fn chi_raw(rho: f64) -> f64 {
    smooth_step(2.0 - rho) * smooth_step(2.0 * rho - 1.0)
}

/// Dyadic bump supported in `(1/2, 2)` with `Σ_k χ(2^{-k}ρ) = 1` for `ρ > 0`.
pub fn chi(rho: f64) -> f64 {
    if rho <= 0.5 || rho >= 2.0 {
        return 0.0;
    }
    let top = rho.log2().floor() as i32;
    let norm: f64 = (top - 2..=top + 2)
        .map(|k| chi_raw(rho * 2f64.powi(-k)))
        .sum();
    chi_raw(rho) / norm
}

/// `P_{≤ν}` multiplier at frequency magnitude `t` (both in cell units).
pub fn cumulative_multiplier(t: f64, nu: DyadicIndex) -> f64 {
    let mut out = 1.0;
    let mut mu = 2.0 * nu.as_f64();
    while mu < 2.0 * t {
        out -= chi(t / mu);
        mu *= 2.0;
    }
    out
}

/// `P_λ` multiplier at frequency magnitude `t`; `λ = 1` collects all of `t ≤ 1`.
pub fn lp_multiplier(t: f64, lambda: DyadicIndex) -> f64 {
    if lambda.0 == 1 {
        cumulative_multiplier(t, lambda)
    } else {
        chi(t / lambda.as_f64())
    }
}

/// Littlewood–Paley projection `P_λ` (scales in cell units).
pub fn lp_projection(f: &SpectralField, lambda: DyadicIndex) -> SpectralField {
    let d0 = f.grid().cell();
    f.apply_multiplier(|xi| Complex64::new(lp_multiplier(norm(xi) / d0, lambda), 0.0))
}

/// Directional band selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionalBand {
    Exact(DyadicIndex),
    AtMost(DyadicIndex),
}

/// Projection `P^ω_λ` or `P^ω_{≤λ}` acting on `|ξ·ω|`.
pub fn directional_projection(
    f: &SpectralField,
    omega: &[f64],
    band: DirectionalBand,
) -> Result<SpectralField> {
    if omega.len() != f.grid().dim() || (norm(omega) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: "direction must be a unit vector of the grid dimension".into(),
        });
    }
    let d0 = f.grid().cell();
    let mut w = [0.0; MAX_DIM];
    w[..omega.len()].copy_from_slice(omega);
    let dim = omega.len();
    Ok(f.apply_multiplier(move |xi| {
        let t = dot(xi, &w[..dim]).abs() / d0;
        let m = match band {
            DirectionalBand::Exact(l) => lp_multiplier(t, l),
            DirectionalBand::AtMost(l) => cumulative_multiplier(t, l),
        };
        Complex64::new(m, 0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn frame3() -> PhaseVector {
        PhaseVector::new(5.0, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng, tau: f64) -> PhaseVector {
        let mut a: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
        let na = norm(&a);
        a.iter_mut().for_each(|v| *v /= na);
        let mut b: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
        let proj = dot(&a, &b);
        b.iter_mut().zip(&a).for_each(|(v, u)| *v -= proj * u);
        let nb = norm(&b);
        b.iter_mut().for_each(|v| *v /= nb);
        PhaseVector::new(tau, a, b).unwrap()
    }

    #[test]
    fn symbol_examples() {
        let z = frame3();
        assert_eq!(symbol_p(&z, &[0.0, 0.0, 0.0]), Complex64::new(0.0, 0.0));
        assert!(symbol_p(&z, &[0.0, 10.0, 0.0]).norm() < 1e-12);
        let p = symbol_p(&z, &[5.0, 0.0, 0.0]);
        assert_relative_eq!(p.re, -25.0);
        assert_relative_eq!(p.im, 50.0);
    }

    #[test]
    fn symbol_matches_complex_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_frame(&mut rng, 7.3);
        for _ in 0..100 {
            let xi: Vec<f64> = (0..3).map(|_| 20.0 * (rng.random::<f64>() - 0.5)).collect();
            let zdotxi: Complex64 = (0..3)
                .map(|i| Complex64::new(z.re()[i], z.im()[i]) * xi[i])
                .sum();
            let want = Complex64::new(-dot(&xi, &xi), 0.0) + Complex64::new(0.0, 2.0) * zdotxi;
            let expanded = Complex64::new(
                -dot(&xi, &xi) + 2.0 * z.tau() * dot(&xi, z.e2()),
                2.0 * z.tau() * dot(&xi, z.e1()),
            );
            assert!((symbol_p(&z, &xi) - want).norm() < 1e-10);
            assert!((symbol_p(&z, &xi) - expanded).norm() < 1e-10);
        }
    }

    #[test]
    fn modulation_examples() {
        let z = frame3();
        assert_eq!(modulation(&z, &[0.0; 3]), 0.0);
        assert_relative_eq!(modulation(&z, &[0.0, 5.0, 0.0]), 5.0);
        assert_relative_eq!(modulation(&z, &[5.0, 0.0, 0.0]), 5.0);
    }

    #[test]
    fn weight_floor() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let z = frame3();
        assert_relative_eq!(symbol_weight(&z, &[0.0; 3], 1.0, &g), 5.0);
        assert_relative_eq!(symbol_weight(&z, &[0.0; 3], 2.5, &g), 12.5);
        let far = [7.0, 3.0, 1.0];
        assert_relative_eq!(symbol_weight(&z, &far, 1.0, &g), symbol_p(&z, &far).norm());
    }

    #[test]
    fn null_construction() {
        let z = frame3();
        assert!(z.null_defect() < 1e-15);
        assert!(PhaseVector::from_parts(vec![1.0, 0.0], vec![0.0, 2.0]).is_err());
        let zt = PhaseVector::from_parts(z.re().to_vec(), z.im().to_vec()).unwrap();
        assert_eq!(zt.e2(), z.e2());
        assert!(PhaseVector::new(1.0, vec![1.0, 0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn band_of_a_known_modulation() {
        let g = PeriodicGrid::new(3, 32, 2.0 * PI).unwrap();
        let z = PhaseVector::new(8.0, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
        let k = [3i64, 0, 0];
        let d = modulation(&z, &[3.0, 0.0, 0.0]);
        assert_relative_eq!(d, 3.0);
        let f = SpectralField::mode(&g, &k, Complex64::new(1.0, 0.0)).unwrap();
        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        let hit = table
            .project(&f, Band::Exact(DyadicIndex::new(4).unwrap()))
            .unwrap();
        assert_eq!(hit, f);
        assert_eq!(DyadicIndex::covering(3.1), DyadicIndex::new(4).unwrap());
    }

    #[test]
    fn bands_partition_the_lattice() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = random_frame(&mut rng, 6.0 * (1.0 + 2f64.sqrt() * 1e-6));
        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        let coeffs = (0..g.len())
            .map(|_| Complex64::new(rng.random(), rng.random()))
            .collect();
        let f = SpectralField::new(g.clone(), coeffs).unwrap();
        let mut total = SpectralField::zeros(&g);
        let bands: Vec<_> = (0..7).map(DyadicIndex::from_exponent).collect();
        for &l in &bands {
            let piece = table.project(&f, Band::Exact(l)).unwrap();
            assert_eq!(table.project(&piece, Band::Exact(l)).unwrap(), piece);
            for &m in &bands {
                if m != l {
                    assert!(table.project(&piece, Band::Exact(m)).unwrap().is_zero());
                }
            }
            total = total.add(&piece).unwrap();
        }
        assert_eq!(total, f);
        let low = table.project(&f, Band::Low).unwrap();
        let high = table.project(&f, Band::High).unwrap();
        assert_eq!(low.add(&high).unwrap(), f);
        assert_eq!(q_projection(&f, &z, Band::Low).unwrap(), low);
        assert!(DyadicIndex::new(3).is_err());
    }

    #[test]
    fn zero_set_of_symbol_is_zero_set_of_modulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let tau0 = 4.0 + 10.0 * rng.random::<f64>();
            let z = random_frame(&mut rng, tau0);
            let tau = z.tau();
            for i in 0..10_000 {
                let xi: Vec<f64> = if i % 2 == 0 {
                    // a point of the sphere
                    let t = 2.0 * PI * rng.random::<f64>();
                    let e3 = [
                        z.e1()[1] * z.e2()[2] - z.e1()[2] * z.e2()[1],
                        z.e1()[2] * z.e2()[0] - z.e1()[0] * z.e2()[2],
                        z.e1()[0] * z.e2()[1] - z.e1()[1] * z.e2()[0],
                    ];
                    (0..3)
                        .map(|k| tau * z.e2()[k] + tau * (t.cos() * z.e2()[k] + t.sin() * e3[k]))
                        .collect()
                } else {
                    (0..3).map(|_| (rng.random::<f64>() - 0.5) * 4.0 * tau).collect()
                };
                let p_zero = symbol_p(&z, &xi).norm() <= 1e-9 * tau * tau;
                let d_zero = modulation(&z, &xi) <= 1e-9 * tau;
                assert_eq!(p_zero, d_zero);
            }
        }
    }

    #[test]
    fn comparability_of_symbol_and_modulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z = random_frame(&mut rng, 16.0);
        let tau = z.tau();
        let (mut near_lo, mut near_hi) = (f64::INFINITY, 0.0f64);
        let (mut far_lo, mut far_hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..20_000 {
            let xi: Vec<f64> = (0..3).map(|_| (rng.random::<f64>() - 0.5) * 6.0 * tau).collect();
            let d = modulation(&z, &xi);
            let p = symbol_p(&z, &xi).norm();
            if d <= tau / 8.0 {
                near_lo = near_lo.min(p / (tau * d));
                near_hi = near_hi.max(p / (tau * d));
            } else {
                let r = p / (tau * tau + dot(&xi, &xi));
                far_lo = far_lo.min(r);
                far_hi = far_hi.max(r);
            }
        }
        assert!(near_lo >= 0.4 && near_hi <= 3.0, "{near_lo} {near_hi}");
        assert!(far_lo >= 0.05 && far_hi <= 4.0, "{far_lo} {far_hi}");
    }

    #[test]
    fn chi_is_a_dyadic_partition() {
        for i in 1..2000 {
            let t = i as f64 * 0.037;
            let s: f64 = (0..12).map(|k| lp_multiplier(t, DyadicIndex::from_exponent(k))).sum();
            assert!((s - 1.0).abs() < 1e-14, "t = {t}: {s}");
            assert!(chi(t) >= 0.0);
        }
        assert_eq!(chi(0.5), 0.0);
        assert_eq!(chi(2.0), 0.0);
        assert_relative_eq!(cumulative_multiplier(0.7, DyadicIndex::new(1).unwrap()), 1.0);
    }

    #[test]
    fn lp_projections_sum_to_identity() {
        let g = PeriodicGrid::new(2, 32, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coeffs = (0..g.len()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let f = SpectralField::new(g.clone(), coeffs).unwrap();
        let mut total = SpectralField::zeros(&g);
        for k in 0..6 {
            total = total.add(&lp_projection(&f, DyadicIndex::from_exponent(k))).unwrap();
        }
        assert!(total.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());

        let wave = SpectralField::mode(&g, &[8, 0], Complex64::new(1.0, 0.0)).unwrap();
        for k in 0..6 {
            let mu = DyadicIndex::from_exponent(k);
            let piece = lp_projection(&wave, mu);
            if ![4, 8, 16].contains(&mu.value()) {
                assert!(piece.is_zero());
            }
        }
    }

    #[test]
    fn directional_cumulative_keeps_slow_waves() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let wave = SpectralField::mode(&g, &[1, 7, -2], Complex64::new(1.0, 0.0)).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let omega = [s, s, s];
        // |k.omega| = 6/sqrt(3) ~ 3.46 <= 4
        let out =
            directional_projection(&wave, &omega, DirectionalBand::AtMost(DyadicIndex::new(8).unwrap()))
                .unwrap();
        assert!(out.sub(&wave).unwrap().l2_norm() < 1e-14);
        assert!(directional_projection(&wave, &[1.0, 1.0, 0.0], DirectionalBand::AtMost(DyadicIndex::new(8).unwrap())).is_err());
    }

    #[test]
    fn axis_permutation_equivariance() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random_frame(&mut rng, 9.0);
        let perm = [2usize, 0, 1];
        let permute = |v: &[f64]| {
            let mut out = vec![0.0; 3];
            for i in 0..3 {
                out[perm[i]] = v[i];
            }
            out
        };
        let zp = PhaseVector::new(z.tau(), permute(z.e1()), permute(z.e2())).unwrap();
        let coeffs: Vec<Complex64> = (0..g.len()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let f = SpectralField::new(g.clone(), coeffs).unwrap();
        let rotate = |h: &SpectralField| {
            let mut out = SpectralField::zeros(&g);
            let mut k = [0i64; 3];
            for flat in 0..g.len() {
                g.lattice_index(flat, &mut k);
                let mut kp = [0i64; 3];
                for i in 0..3 {
                    kp[perm[i]] = k[i];
                }
                out.coeffs_mut()[g.flat_index(&kp).unwrap()] = h.coeffs()[flat];
            }
            out
        };
        for band in [Band::Exact(DyadicIndex::new(2).unwrap()), Band::Low, Band::High] {
            let lhs = q_projection(&rotate(&f), &zp, band).unwrap();
            let rhs = rotate(&q_projection(&f, &z, band).unwrap());
            assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
        }
    }
}
