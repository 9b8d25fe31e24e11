//! Potentials from conductivities, the conjugated Laplacian and its floored
//! inverse, CGO remainders by Picard iteration, and the pairing functionals.
//!
//! A CGO solution `u = e^{x·ζ}(1 + ψ)` of `Δu = qu` corresponds to
//! `Δ_ζ ψ = q(1 + ψ)` with `Δ_ζ = Δ + 2ζ·∇`. Everything here stays in that
//! conjugated frame; the exponential factor is never formed.

use std::collections::HashMap;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase::{PhaseVector, SymbolTable};
use crate::spectral::{
    dealiased_product_spectral, divergence, forward_transform, gradient, inverse_transform,
    laplacian, refine, Field, PaddedMultiplier, PeriodicGrid, SpectralField,
};

/// Largest `|γ − 1|` tolerated outside the support ball.
pub const SUPPORT_TOL: f64 = 1e-5;

/// Required relative agreement of the two potential formulas.
pub const POTENTIAL_AGREEMENT: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A real, positive conductivity equal to 1 outside a centred ball.
#[derive(Debug, Clone)]
pub struct Conductivity {
    gamma: Field,
    min: f64,
    max: f64,
    support_radius: f64,
}

impl Conductivity {
    /// Validates positivity, reality and the support condition around the
    /// box centre.
    pub fn new(gamma: Field, support_radius: f64) -> Result<Self> {
        let grid = gamma.grid().clone();
        if !(support_radius > 0.0 && support_radius <= grid.length() / 2.0) {
            return Err(Error::InvalidParameter {
                name: "support_radius",
                reason: format!("must lie in (0, L/2], got {support_radius}"),
            });
        }
        let scale = gamma.max_abs().max(1.0);
        if gamma.max_imag() > 1e-12 * scale {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: "conductivity must be real".into(),
            });
        }
        let re = gamma.real_parts();
        let min = re.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min > 0.0) || !max.is_finite() {
            return Err(Error::Ellipticity { min, max });
        }
        let centre = grid.length() / 2.0;
        let outside: Vec<bool> = grid.map_points(|x| {
            x.iter().map(|v| (v - centre).powi(2)).sum::<f64>() > support_radius * support_radius
        });
        let deviation = re
            .iter()
            .zip(&outside)
            .filter(|(_, &o)| o)
            .map(|(v, _)| (v - 1.0).abs())
            .fold(0.0, f64::max);
        if deviation > SUPPORT_TOL {
            return Err(Error::Support {
                radius: support_radius,
                deviation,
            });
        }
        let gamma = gamma.map(|v| Complex64::new(v.re, 0.0));
        Ok(Self {
            gamma,
            min,
            max,
            support_radius,
        })
    }

    /// `γ ≡ 1`.
    pub fn uniform(grid: &PeriodicGrid) -> Self {
        Self {
            gamma: Field::constant(grid, ONE),
            min: 1.0,
            max: 1.0,
            support_radius: grid.length() / 4.0,
        }
    }

    pub fn gamma(&self) -> &Field {
        &self.gamma
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.gamma.grid()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Largest `c` with `c ≤ γ ≤ 1/c`.
    pub fn ellipticity(&self) -> f64 {
        self.min.min(1.0 / self.max)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }
}

/// `q = γ^{-1/2} Δ γ^{1/2} = div f + h` with `f = ½∇log γ`, `h = ¼|∇log γ|²`.
#[derive(Debug, Clone)]
pub struct PotentialDecomposition {
    pub q: Field,
    pub f: Vec<Field>,
    pub h: Field,
    /// Relative `L²` gap between the two evaluation routes.
    pub route_gap: f64,
}

fn real_part(f: &Field) -> Field {
    f.map(|v| Complex64::new(v.re, 0.0))
}

/// Computes the Schrödinger potential by both routes and insists they agree.
pub fn schrodinger_potential(gamma: &Conductivity) -> Result<PotentialDecomposition> {
    let g = gamma.gamma();
    let root = g.map(|v| Complex64::new(v.re.sqrt(), 0.0));
    let q_direct = laplacian(&root).zip_map(&root, |a, b| Complex64::new(a.re / b.re, 0.0))?;

    let log = g.map(|v| Complex64::new(v.re.ln(), 0.0));
    let grad = gradient(&log);
    let f: Vec<Field> = grad
        .iter()
        .map(|d| d.map(|v| Complex64::new(0.5 * v.re, 0.0)))
        .collect();
    let mut h_vals = vec![0.0; g.grid().len()];
    for d in &grad {
        for (acc, v) in h_vals.iter_mut().zip(d.values()) {
            *acc += 0.25 * v.re * v.re;
        }
    }
    let h = Field::from_real(g.grid().clone(), &h_vals)?;
    let q = real_part(&divergence(&f)?.add(&h)?);

    let scale = forward_transform(&q).l2_norm().max(forward_transform(&q_direct).l2_norm());
    let gap = forward_transform(&q.sub(&q_direct)?).l2_norm();
    let route_gap = if scale > 0.0 { gap / scale } else { 0.0 };
    if route_gap > POTENTIAL_AGREEMENT {
        return Err(Error::UnderResolved(route_gap));
    }
    Ok(PotentialDecomposition { q, f, h, route_gap })
}

/// Normalized radial bump `exp(−1/(1−|x|²))` on the unit ball.
fn bump_profile(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Fourier transform of the normalized unit bump, as a function of `|ξ|`.
///
/// The bump is reduced to its one-dimensional marginal `Φ(t)`, which is
/// smooth and flat at `t = ±1`, so the trapezoid rule converges
/// spectrally; `φ̂(κ) = ∫Φ(t) cos(κt) dt / ∫Φ`.
#[derive(Debug, Clone)]
pub struct BumpTransform {
    nodes: Vec<f64>,
    marginal: Vec<f64>,
    mass: f64,
}

impl BumpTransform {
    pub fn new(dim: usize) -> Self {
        const T_NODES: usize = 1024;
        const R_NODES: usize = 400;
        let h = 2.0 / T_NODES as f64;
        let nodes: Vec<f64> = (0..=T_NODES).map(|i| -1.0 + i as f64 * h).collect();
        let marginal: Vec<f64> = nodes
            .iter()
            .map(|&t| {
                let top = (1.0 - t * t).max(0.0).sqrt();
                if top == 0.0 {
                    return 0.0;
                }
                if dim == 1 {
                    return bump_profile(t * t);
                }
                // Simpson over the transverse radius.
                let dr = top / R_NODES as f64;
                let mut acc = 0.0;
                for j in 0..=R_NODES {
                    let rho = j as f64 * dr;
                    let wgt = if j == 0 || j == R_NODES {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += wgt * bump_profile(t * t + rho * rho) * rho.powi(dim as i32 - 2);
                }
                acc * dr / 3.0
            })
            .collect();
        let mass = marginal.iter().sum();
        Self {
            nodes,
            marginal,
            mass,
        }
    }

    /// `φ̂(κ)` normalized so that `φ̂(0) = 1` exactly.
    pub fn eval(&self, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 1.0;
        }
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.marginal)
            .map(|(t, m)| m * (kappa * t).cos())
            .sum();
        s / self.mass
    }
}

/// Convolution with `ε^{-n}φ(x/ε)`, applied as the multiplier `φ̂(εξ)`.
pub fn mollify(f: &Field, eps: f64) -> Result<Field> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    let grid = f.grid();
    let bump = BumpTransform::new(grid.dim());
    let d0 = grid.cell();
    // |ξ|² / d0² is an integer, so the transform is tabulated per shell.
    let shells: Vec<u64> = grid.map_frequencies(|xi| {
        (xi.iter().map(|v| v * v).sum::<f64>() / (d0 * d0)).round() as u64
    });
    let mut distinct = shells.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let values: Vec<f64> = distinct
        .par_iter()
        .map(|&m| bump.eval(eps * d0 * (m as f64).sqrt()))
        .collect();
    let lookup: HashMap<u64, f64> = distinct.into_iter().zip(values).collect();
    let table: Vec<f64> = shells.iter().map(|m| lookup[m]).collect();
    Ok(inverse_transform(&forward_transform(f).scale_by(&table)))
}

/// `p_ζ` rescaled to modulus `w = max(|p_ζ|, floor)`; real `w` where `p_ζ = 0`.
pub fn regularized_symbol(table: &SymbolTable) -> Vec<Complex64> {
    table
        .symbol()
        .iter()
        .zip(table.weight())
        .map(|(&p, &w)| {
            let m = p.norm();
            if m > 0.0 {
                p * (w / m)
            } else {
                Complex64::new(w, 0.0)
            }
        })
        .collect()
}

/// Output of the floored inverse.
#[derive(Debug, Clone)]
pub struct InverseOutput {
    pub field: Field,
    /// Share of the non-zero input coefficients on which the floor acted.
    pub floored_fraction: f64,
}

/// Share of non-zero coefficients of `g` that sit on floored frequencies.
pub fn floored_fraction(table: &SymbolTable, g: &SpectralField) -> f64 {
    let floored = table.floored();
    let (mut hit, mut total) = (0usize, 0usize);
    for (c, &fl) in g.coeffs().iter().zip(&floored) {
        if c.norm_sqr() > 0.0 {
            total += 1;
            hit += fl as usize;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Spectral floored inverse `ĝ / p̃_ζ` against a precomputed table.
pub fn inverse_delta_zeta_spectral(table: &SymbolTable, g: &SpectralField) -> Result<SpectralField> {
    table.grid().check_same(g.grid())?;
    let div = regularized_symbol(table);
    g.zip_map(
        &SpectralField::new(g.grid().clone(), div)?,
        |a, d| a / d,
    )
}

/// Right inverse of `Δ_ζ` with one-cell floor on `|p_ζ|`.
pub fn apply_inverse_delta_zeta(g: &Field, zeta: &PhaseVector) -> Result<InverseOutput> {
    apply_inverse_delta_zeta_floored(g, zeta, 1.0)
}

pub fn apply_inverse_delta_zeta_floored(
    g: &Field,
    zeta: &PhaseVector,
    floor_cells: f64,
) -> Result<InverseOutput> {
    let table = SymbolTable::new(g.grid(), zeta, floor_cells)?;
    let gh = forward_transform(g);
    let out = inverse_delta_zeta_spectral(&table, &gh)?;
    Ok(InverseOutput {
        field: inverse_transform(&out),
        floored_fraction: floored_fraction(&table, &gh),
    })
}

/// `Δ_ζ w` via the multiplier `p_ζ`.
pub fn apply_delta_zeta(w: &Field, zeta: &PhaseVector) -> Result<Field> {
    if zeta.dim() != w.grid().dim() {
        return Err(Error::GridMismatch);
    }
    Ok(inverse_transform(
        &forward_transform(w).apply_multiplier(|xi| crate::phase::symbol_p(zeta, xi)),
    ))
}

/// `Δw + 2ζ·∇w` assembled from spectral derivatives.
pub fn apply_delta_zeta_by_derivatives(w: &Field, zeta: &PhaseVector) -> Result<Field> {
    if zeta.dim() != w.grid().dim() {
        return Err(Error::GridMismatch);
    }
    let mut out = laplacian(w);
    for (axis, d) in gradient(w).iter().enumerate() {
        let z = Complex64::new(zeta.re()[axis], zeta.im()[axis]) * 2.0;
        out = out.add(&d.scale(z))?;
    }
    Ok(out)
}

/// Controls for [`solve_cgo`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub floor_cells: f64,
    /// Recompute the residual on the doubled grid.
    pub refined_check: bool,
}

impl Default for CgoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            floor_cells: 1.0,
            refined_check: true,
        }
    }
}

/// A converged CGO remainder.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub zeta: PhaseVector,
    pub psi: Field,
    pub psi_hat: SpectralField,
    /// `‖Δ̃_ζψ − q(1+ψ)‖₂` on the grid, `Δ̃_ζ` the floored operator.
    pub residual: f64,
    /// The same residual on the doubled grid with plain products.
    pub refined_residual: Option<f64>,
    /// `‖(Δ_ζ − Δ̃_ζ)ψ‖₂`: what the floor changed.
    pub floor_defect: f64,
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub floored_fraction: f64,
    /// `‖ψ‖_{Ẋ^{1/2}}`.
    pub psi_norm: f64,
    /// `‖q‖_{Ẋ^{-1/2}}`.
    pub q_norm: f64,
}

impl CgoSolution {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Picard iteration `ψ_{k+1} = Δ̃_ζ^{-1}(q(1+ψ_k))` from `ψ_0 = 0`.
pub fn solve_cgo(q: &Field, zeta: &PhaseVector, opts: &CgoOptions) -> Result<CgoSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {}", opts.tol),
        });
    }
    let grid = q.grid().clone();
    let table = SymbolTable::new(&grid, zeta, opts.floor_cells)?;
    let div = SpectralField::new(grid.clone(), regularized_symbol(&table))?;
    let qh = forward_transform(q);
    let half = table.weight_power(0.5, true);
    let minus_half = table.weight_power(-0.5, true);
    let q_norm = qh.weighted_l2(&minus_half);

    let finish = |psi_hat: SpectralField, residual: f64, ratios: Vec<f64>, iterations: usize| {
        let floor_defect = psi_hat
            .zip_map(&div, |c, d| c * d)
            .and_then(|a| a.sub(&psi_hat.apply_multiplier(|xi| crate::phase::symbol_p(zeta, xi))))
            .map(|d| d.l2_norm())?;
        let refined_residual = if opts.refined_check {
            Some(refined_residual(&qh, &psi_hat, &table)?)
        } else {
            None
        };
        Ok(CgoSolution {
            zeta: zeta.clone(),
            psi: inverse_transform(&psi_hat),
            psi_norm: psi_hat.weighted_l2(&half),
            floored_fraction: floored_fraction(&table, &qh),
            psi_hat,
            residual,
            refined_residual,
            floor_defect,
            ratios,
            iterations,
            q_norm,
        })
    };

    if qh.is_zero() {
        return finish(SpectralField::zeros(&grid), 0.0, Vec::new(), 0);
    }
    let q_l2 = qh.l2_norm();
    let mult = PaddedMultiplier::from_spectrum(&qh);
    let mut psi = SpectralField::zeros(&grid);
    let mut rhs = qh.clone();
    let mut first = 0.0;
    let mut prev = 0.0;
    let mut ratios = Vec::new();
    let mut bad_streak = 0;
    for k in 1..=opts.max_iter {
        let next = rhs.zip_map(&div, |a, d| a / d)?;
        let step = next.sub(&psi)?.weighted_l2(&half);
        if k == 1 {
            first = step;
        } else {
            let ratio = if prev > 0.0 { step / prev } else { 0.0 };
            ratios.push(ratio);
            bad_streak = if ratio >= 1.0 { bad_streak + 1 } else { 0 };
            if bad_streak >= 3 {
                return Err(Error::ContractionFailure {
                    ratio,
                    iterations: k,
                    zeta: zeta.to_string(),
                });
            }
        }
        psi = next;
        prev = step;
        rhs = qh.add(&mult.apply(&psi)?)?;
        let residual = psi.zip_map(&div, |c, d| c * d)?.sub(&rhs)?.l2_norm();
        if step <= opts.tol * first || residual <= opts.tol * q_l2 {
            return finish(psi, residual, ratios, k);
        }
        if !step.is_finite() {
            break;
        }
    }
    Err(Error::MaxIterations {
        max_iter: opts.max_iter,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
    })
}

/// `‖Δ̃_ζψ − q(1+ψ)‖₂` evaluated on the doubled grid by spectral
/// interpolation and plain pointwise products (exact for band-limited data).
fn refined_residual(qh: &SpectralField, psi: &SpectralField, table: &SymbolTable) -> Result<f64> {
    let fine = qh.grid().refined(2)?;
    let zeta = table.zeta();
    let floor = table.floor();
    let q2 = inverse_transform(&refine(qh, &fine)?);
    let psi2h = refine(psi, &fine)?;
    let psi2 = inverse_transform(&psi2h);
    let prod = q2.zip_map(&psi2, |a, b| a * (ONE + b))?;
    let op = psi2h.apply_multiplier(|xi| {
        let p = crate::phase::symbol_p(zeta, xi);
        let m = p.norm();
        if m >= floor {
            p
        } else if m > 0.0 {
            p * (floor / m)
        } else {
            Complex64::new(floor, 0.0)
        }
    });
    Ok(op.sub(&forward_transform(&prod))?.l2_norm())
}

/// `∫ q e^{ik·x} w dx` for lattice `k`, evaluated exactly from the spectra:
/// `vol · Σ_{a+b=−k} q̂(a) ŵ(b)`.
pub fn pairing_spectral(q: &SpectralField, k: &[i64], w: &SpectralField) -> Result<Complex64> {
    let grid = q.grid();
    grid.check_same(w.grid())?;
    if k.len() != grid.dim() {
        return Err(Error::OffLattice(k.iter().map(|&v| v as f64).collect()));
    }
    let mut a = vec![0i64; grid.dim()];
    let mut b = vec![0i64; grid.dim()];
    let mut acc = ZERO;
    for (flat, &qa) in q.coeffs().iter().enumerate() {
        if qa.norm_sqr() == 0.0 {
            continue;
        }
        grid.lattice_index(flat, &mut a);
        for i in 0..b.len() {
            b[i] = -k[i] - a[i];
        }
        if let Some(fb) = grid.flat_index(&b) {
            acc += qa * w.coeffs()[fb];
        }
    }
    Ok(acc * grid.volume())
}

/// `∫ q e^{ik·x}(1+ψ₁)(1+ψ₂) dx` at lattice index `k`.
pub fn pairing_at(q: &Field, k: &[i64], psi1: &Field, psi2: &Field) -> Result<Complex64> {
    let one_plus = |p: &Field| p.map(|v| ONE + v);
    let a = dealiased_product_spectral(
        &forward_transform(&one_plus(psi1)),
        &forward_transform(&one_plus(psi2)),
    )?;
    pairing_spectral(&forward_transform(q), k, &a)
}

/// `∫ q e^{ik·x}(1+ψ₁)(1+ψ₂) dx` for a physical lattice frequency `k`.
pub fn pairing(q: &Field, k: &[f64], psi1: &Field, psi2: &Field) -> Result<Complex64> {
    let idx = q
        .grid()
        .snap_frequency(k, 1e-9)
        .ok_or_else(|| Error::OffLattice(k.to_vec()))?;
    pairing_at(q, &idx, psi1, psi2)
}

/// Physical-space Gaussian `a·exp(−|x − c|²/w²)` (no periodization).
pub fn gaussian(grid: &PeriodicGrid, centre: &[f64], amplitude: f64, width: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(centre).map(|(a, b)| (a - b).powi(2)).sum();
        Complex64::new(amplitude * (-r2 / (width * width)).exp(), 0.0)
    })
}

/// Centre of the box, the centre of every support ball.
pub fn box_centre(grid: &PeriodicGrid) -> Vec<f64> {
    vec![grid.length() / 2.0; grid.dim()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::spaces::x_norm_with;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(3, n, 2.0 * PI).unwrap()
    }

    fn zeta(tau: f64) -> PhaseVector {
        let s = 0.5f64.sqrt();
        PhaseVector::new(tau * (1.0 + 2f64.sqrt() * 1e-6), vec![s, s, 0.0], vec![0.0, 0.0, 1.0]).unwrap()
    }

    fn bump_gamma(g: &PeriodicGrid, amp: f64) -> Conductivity {
        let c = box_centre(g);
        let bump = gaussian(g, &c, amp, 0.45);
        Conductivity::new(bump.map(|v| ONE + v), g.length() / 4.0).unwrap()
    }

    fn random_field(g: &PeriodicGrid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        Field::new(g.clone(), v).unwrap()
    }

    #[test]
    fn uniform_conductivity_has_zero_potential() {
        let g = grid(16);
        let pd = schrodinger_potential(&Conductivity::uniform(&g)).unwrap();
        assert_eq!(pd.q.max_abs(), 0.0);
        assert_eq!(pd.h.max_abs(), 0.0);
        assert!(pd.f.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn exponential_conductivity_potential() {
        let g = grid(64);
        let c = box_centre(&g);
        let w = gaussian(&g, &c, 0.1, 0.45);
        let gamma = Conductivity::new(w.map(|v| (v * 2.0).exp()), g.length() / 4.0).unwrap();
        let pd = schrodinger_potential(&gamma).unwrap();
        let grad = gradient(&w);
        let mut want = laplacian(&w);
        for d in &grad {
            want = want.add(&d.zip_map(d, |a, b| a * b).unwrap()).unwrap();
        }
        let err = pd.q.sub(&want).unwrap().max_abs();
        assert!(err < 1e-10 * want.max_abs(), "{err}");
        assert!(pd.h.values().iter().all(|v| v.re >= 0.0));
        let recomposed = divergence(&pd.f).unwrap().add(&pd.h).unwrap();
        assert!(forward_transform(&recomposed.sub(&pd.q).unwrap()).l2_norm() <= 1e-8 * forward_transform(&pd.q).l2_norm());
    }

    #[test]
    fn bump_potential_is_resolved() {
        let g = grid(64);
        let coarse = schrodinger_potential(&bump_gamma(&g, 0.1)).unwrap();
        let fine_grid = g.refined(2).unwrap();
        let fine = schrodinger_potential(&bump_gamma(&fine_grid, 0.1)).unwrap();
        let restricted = crate::spectral::truncate(&forward_transform(&fine.q), &g).unwrap();
        let err = restricted.sub(&forward_transform(&coarse.q)).unwrap().l2_norm();
        assert!(err <= 1e-6 * restricted.l2_norm(), "{err}");
    }

    #[test]
    fn conductivity_validation() {
        let g = grid(16);
        let neg = Field::constant(&g, Complex64::new(-1.0, 0.0));
        assert!(matches!(Conductivity::new(neg, 1.0), Err(Error::Ellipticity { .. })));
        let wide = gaussian(&g, &box_centre(&g), 0.1, 2.0).map(|v| ONE + v);
        assert!(matches!(Conductivity::new(wide, g.length() / 4.0), Err(Error::Support { .. })));
        let gamma = bump_gamma(&g, 0.1);
        assert!(gamma.min() >= 0.9 && gamma.max() <= 1.1 + 1e-12);
    }

    #[test]
    fn mollifier_examples() {
        let g = grid(32);
        let one = Field::constant(&g, Complex64::new(2.5, 0.0));
        assert!(mollify(&one, 0.3).unwrap().sub(&one).unwrap().max_abs() < 1e-12);
        let f = gaussian(&g, &box_centre(&g), 1.0, 0.6);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| forward_transform(&mollify(&f, e).unwrap().sub(&f).unwrap()).l2_norm())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(mollify(&f, 0.0).is_err());
    }

    #[test]
    fn bump_transform_matches_closed_form_in_3d() {
        // In three dimensions φ̂(κ) = ∫ φ(r) 4π r sin(κr)/κ dr / ∫ φ(r) 4π r² dr.
        let bt = BumpTransform::new(3);
        let radial = |kappa: f64| {
            let m = 20_000;
            let h = 1.0 / m as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 1..m {
                let r = i as f64 * h;
                let phi = bump_profile(r * r);
                num += phi * r * (kappa * r).sin() / kappa;
                den += phi * r * r;
            }
            num / den
        };
        for kappa in [0.5, 2.0, 7.5, 15.0] {
            assert_relative_eq!(bt.eval(kappa), radial(kappa), epsilon = 1e-9);
        }
    }

    #[test]
    fn inverse_examples() {
        let g = grid(16);
        let z = zeta(5.0);
        let k = [1i64, 2, -3];
        let mode = inverse_transform(&SpectralField::mode(&g, &k, ONE).unwrap());
        let out = apply_inverse_delta_zeta(&mode, &z).unwrap();
        let p = crate::phase::symbol_p(&z, &[1.0, 2.0, -3.0]);
        assert!(p.norm() > z.tau());
        assert!(out.field.sub(&mode.scale(ONE / p)).unwrap().max_abs() < 1e-14);
        assert_eq!(out.floored_fraction, 0.0);

        let zero_mode = Field::constant(&g, ONE);
        assert_eq!(apply_inverse_delta_zeta(&zero_mode, &z).unwrap().floored_fraction, 1.0);

        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        let keep: Vec<bool> = table.floored().iter().map(|b| !b).collect();
        let gh = forward_transform(&random_field(&g, 3)).masked(&keep);
        let u = apply_inverse_delta_zeta(&inverse_transform(&gh), &z).unwrap().field;
        let back = forward_transform(&apply_delta_zeta(&u, &z).unwrap());
        assert!(back.sub(&gh).unwrap().l2_norm() <= 1e-10 * gh.l2_norm());
    }

    #[test]
    fn carleman_isometry() {
        let g = grid(16);
        let z = zeta(7.0);
        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        for seed in 0..5 {
            let gf = random_field(&g, seed);
            let u = apply_inverse_delta_zeta(&gf, &z).unwrap().field;
            let lhs = x_norm_with(&forward_transform(&u), &table, 0.5, true).unwrap();
            let rhs = x_norm_with(&forward_transform(&gf), &table, -0.5, true).unwrap();
            assert_relative_eq!(lhs / rhs, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conjugation_identity() {
        let g = grid(16);
        let z = zeta(9.0);
        let w = random_field(&g, 8);
        let a = apply_delta_zeta(&w, &z).unwrap();
        let b = apply_delta_zeta_by_derivatives(&w, &z).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-11 * a.max_abs());
    }

    #[test]
    fn trivial_cgo_solutions() {
        let g = grid(16);
        let z = zeta(8.0);
        let sol = solve_cgo(&Field::zeros(&g), &z, &CgoOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.psi.max_abs(), 0.0);
        let q = schrodinger_potential(&Conductivity::uniform(&g)).unwrap().q;
        assert_eq!(solve_cgo(&q, &z, &CgoOptions::default()).unwrap().psi.max_abs(), 0.0);
    }

    #[test]
    fn cgo_converges_for_a_small_bump() {
        let g = grid(64);
        let pd = schrodinger_potential(&bump_gamma(&g, 0.1)).unwrap();
        let z = zeta(8.0);
        let sol = solve_cgo(&pd.q, &z, &CgoOptions::default()).unwrap();
        assert!(sol.ratios.iter().all(|&r| r < 1.0));
        assert!(sol.residual <= 1e-8, "{}", sol.residual);
        assert!(sol.refined_residual.unwrap() <= 1e-8);
        assert!(sol.psi_norm <= sol.q_norm / (1.0 - sol.max_ratio()) * (1.0 + 1e-9));
        assert!(sol.psi_norm <= 2.0 * sol.q_norm);
    }

    #[test]
    fn strong_potential_fails_to_contract() {
        let g = grid(16);
        let q = gaussian(&g, &box_centre(&g), -400.0, 1.0);
        let z = zeta(2.0);
        let err = solve_cgo(&q, &z, &CgoOptions { max_iter: 40, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::ContractionFailure { .. } | Error::MaxIterations { .. }));
    }

    #[test]
    fn pairing_examples() {
        let g = grid(16);
        let q = gaussian(&g, &box_centre(&g), 1.0, 0.8);
        let zero = Field::zeros(&g);
        let k = [1.0, -2.0, 0.0];
        let direct = pairing(&q, &k, &zero, &zero).unwrap();
        let qh = forward_transform(&q);
        let want = qh.coefficient(&[-1, 2, 0]).unwrap() * g.volume();
        assert!((direct - want).norm() < 1e-12 * want.norm());
        let brute: Complex64 = Field::from_fn(&g, |x| Complex64::from_polar(1.0, x[0] - 2.0 * x[1]))
            .zip_map(&q, |a, b| a * b)
            .unwrap()
            .integral();
        assert!((direct - brute).norm() < 1e-10 * brute.norm());
        assert_eq!(pairing(&zero, &k, &q, &q).unwrap(), ZERO);
        assert!(matches!(pairing(&q, &[0.5, 0.0, 0.0], &zero, &zero), Err(Error::OffLattice(_))));
    }

    #[test]
    fn pairing_expands_term_by_term() {
        let g = grid(16);
        let q = gaussian(&g, &box_centre(&g), 1.0, 0.8);
        let s1 = mollify(&random_field(&g, 1), 0.4).unwrap().scale(Complex64::new(0.05, 0.0));
        let s2 = mollify(&random_field(&g, 2), 0.4).unwrap().scale(Complex64::new(0.0, 0.05));
        let k = [2i64, 0, -1];
        let qh = forward_transform(&q);
        let one = forward_transform(&Field::constant(&g, ONE));
        let lin = forward_transform(&s1.add(&s2).unwrap());
        let bil = dealiased_product_spectral(&forward_transform(&s1), &forward_transform(&s2)).unwrap();
        let parts = pairing_spectral(&qh, &k, &one).unwrap()
            + pairing_spectral(&qh, &k, &lin).unwrap()
            + pairing_spectral(&qh, &k, &bil).unwrap();
        let whole = pairing_at(&q, &k, &s1, &s2).unwrap();
        assert!((whole - parts).norm() <= 1e-10 * whole.norm());
    }
}
