//! Strichartz-type ratios `‖f‖_p / ‖f‖_{X^{1/2}_ζ}` with `p = 2n/(n−2)`,
//! on single modulation bands and on the full spectrum.

use num_complex::Complex64;
use rayon::prelude::*;

use super::rng::Stream;
use super::{gaussian_spectrum, log_log_slope, mean_std, EstimateReport};
use crate::error::{Error, Result};
use crate::phase::{Band, DyadicIndex, PhaseVector, SymbolTable};
use crate::spaces::x_norm_with;
use crate::spectral::{forward_transform, inverse_transform, lp_norm, PeriodicGrid, SpectralField};

/// Most steps of the nonlinear power ascent applied to each trial field.
pub const ASCENT_STEPS: usize = 30;

/// The ascent stops once a step raises the ratio by less than this fraction.
pub const ASCENT_TOL: f64 = 1e-3;

fn exponent(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("Strichartz exponent needs n >= 3, got {dim}"),
        });
    }
    Ok(2.0 * dim as f64 / (dim as f64 - 2.0))
}

fn check_band(table: &SymbolTable, lambda: DyadicIndex) -> Result<()> {
    let tau = table.zeta().tau();
    let top = lambda.as_f64() * table.grid().cell();
    if top > tau / 8.0 {
        return Err(Error::Precondition(format!(
            "band {} ({top} physical) exceeds tau/8 = {}",
            lambda.value(),
            tau / 8.0
        )));
    }
    Ok(())
}

fn ratio(f: &SpectralField, table: &SymbolTable, p: f64) -> Result<f64> {
    let x = x_norm_with(f, table, 0.5, false)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(lp_norm(&inverse_transform(f), p)? / x)
}

/// `‖f‖_p / ‖f‖_{X^{1/2}_ζ}` for `f` supported in `E_λ`.
pub fn band_strichartz_ratio(f: &SpectralField, zeta: &PhaseVector, lambda: DyadicIndex) -> Result<f64> {
    let table = SymbolTable::new(f.grid(), zeta, 1.0)?;
    check_band(&table, lambda)?;
    let mask = table.band_mask(Band::Exact(lambda));
    if f.coeffs().iter().zip(&mask).any(|(c, &k)| !k && c.norm_sqr() > 0.0) {
        return Err(Error::Precondition(format!(
            "field has coefficients outside modulation band {}",
            lambda.value()
        )));
    }
    ratio(f, &table, exponent(zeta.dim())?)
}

/// Monotone ascent for `‖f‖_p` on the `X^{1/2}` sphere of the band:
/// `c ← mask · F(|g|^{p−2} g) / (|p_ζ| + τ)`, renormalized.
fn ascend(start: SpectralField, mask: &[bool], inv_weight: &[f64], table: &SymbolTable, p: f64) -> Result<SpectralField> {
    let mut c = start;
    let mut prev = 0.0;
    for _ in 0..ASCENT_STEPS {
        let g = inverse_transform(&c);
        let top = g.max_abs();
        if top == 0.0 {
            break;
        }
        let current = lp_norm(&g, p)? / x_norm_with(&c, table, 0.5, false)?;
        if current <= prev * (1.0 + ASCENT_TOL) {
            break;
        }
        prev = current;
        // Scale before powering to keep |g|^{p−2} in range.
        let h = g.map(|v| {
            let s = v / top;
            s * s.norm().powf(p - 2.0)
        });
        c = forward_transform(&h).masked(mask).scale_by(inv_weight);
        let x = x_norm_with(&c, table, 0.5, false)?;
        if x == 0.0 {
            break;
        }
        c = c.scale(Complex64::new(1.0 / x, 0.0));
    }
    Ok(c)
}

/// Largest band ratio over `trials` Gaussian starts, each improved by the
/// power ascent. The constant is `ratio / (λd₀/τ)^{1/n}`.
pub fn strichartz_constant(
    grid: &PeriodicGrid,
    zeta: &PhaseVector,
    lambda: DyadicIndex,
    trials: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    let p = exponent(grid.dim())?;
    let table = SymbolTable::new(grid, zeta, 1.0)?;
    check_band(&table, lambda)?;
    let tau = zeta.tau();
    let report = EstimateReport::new("strichartz_band", trials, 1)?
        .param("tau", tau)
        .param("lambda", lambda.as_f64())
        .param("p", p);
    let mask = table.band_mask(Band::Exact(lambda));
    let cells = mask.iter().filter(|&&k| k).count();
    if cells == 0 {
        return Err(Error::Precondition(format!(
            "modulation band {} has no lattice points",
            lambda.value()
        )));
    }
    let inv_weight = table.weight_power(-1.0, false);
    let stream = stream.child("strichartz_band", &[tau, lambda.as_f64()]);
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let start = gaussian_spectrum(grid, Some(&mask), &mut stream.rng(i));
            let before = ratio(&start, &table, p)?;
            let after = ratio(&ascend(start, &mask, &inv_weight, &table, p)?, &table, p)?;
            Ok((before, after))
        })
        .collect::<Result<_>>()?;
    let best = pairs.iter().map(|r| r.1).fold(0.0, f64::max);
    let random = pairs.iter().map(|r| r.0).fold(0.0, f64::max);
    let scale = (lambda.as_f64() * grid.cell() / tau).powf(1.0 / grid.dim() as f64);
    let (_, spread) = mean_std(&pairs.iter().map(|r| r.1).collect::<Vec<_>>());
    let truncated = 2.0 * tau > grid.nyquist();
    report
        .extra("ratio", best)
        .extra("random_ratio", random)
        .extra("band_cells", cells as f64)
        .extra("circle_truncated", truncated as u8 as f64)
        .finish(best / scale, spread / scale)
}

/// Band constants for several `λ` and the fitted exponent of the maximized
/// ratio against `λ` (the report's constant).
pub fn strichartz_band_scaling(
    grid: &PeriodicGrid,
    zeta: &PhaseVector,
    lambdas: &[DyadicIndex],
    trials: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    if lambdas.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: "need at least two bands for a slope".into(),
        });
    }
    let mut report = EstimateReport::new("strichartz_band_exponent", trials, 1)?.param("tau", zeta.tau());
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for &l in lambdas {
        let r = strichartz_constant(grid, zeta, l, trials, stream)?;
        let ratio = r.get_extra("ratio").unwrap_or(0.0);
        report = report
            .extra(&format!("ratio_{}", l.value()), ratio)
            .extra(&format!("constant_{}", l.value()), r.constant);
        x.push(l.as_f64());
        y.push(ratio);
    }
    report.finish(log_log_slope(&x, &y), 0.0)
}

/// Largest `‖f‖_p / ‖f‖_{X^{1/2}_ζ}` over full-spectrum Gaussian fields.
pub fn strichartz_global(
    grid: &PeriodicGrid,
    zeta: &PhaseVector,
    trials: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    let p = exponent(grid.dim())?;
    let table = SymbolTable::new(grid, zeta, 1.0)?;
    let report = EstimateReport::new("strichartz_global", trials, 1)?
        .param("tau", zeta.tau())
        .param("p", p);
    let stream = stream.child("strichartz_global", &[zeta.tau()]);
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| ratio(&gaussian_spectrum(grid, None, &mut stream.rng(i)), &table, p))
        .collect::<Result<_>>()?;
    let (mean, spread) = mean_std(&ratios);
    report
        .extra("mean_ratio", mean)
        .finish(ratios.iter().cloned().fold(0.0, f64::max), spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zeta(tau: f64) -> PhaseVector {
        let s = 0.5f64.sqrt();
        PhaseVector::new(tau * (1.0 + 2f64.sqrt() * 1e-6), vec![s, 0.0, s], vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn preconditions() {
        let g = PeriodicGrid::new(3, 32, 2.0 * PI).unwrap();
        let z = zeta(16.0);
        let s = Stream::new(1, "t", &[]);
        // λ = 4 cells exceeds τ/8 = 2.
        assert!(strichartz_constant(&g, &z, DyadicIndex::new(4).unwrap(), 1, &s).is_err());
        let off = SpectralField::mode(&g, &[0, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        // ξ = 0 lies on Σ_ζ, so it belongs to E₁ and not to E₂.
        assert!(band_strichartz_ratio(&off, &z, DyadicIndex::new(2).unwrap()).is_err());
        assert!(band_strichartz_ratio(&off, &z, DyadicIndex::new(1).unwrap()).is_ok());
        let g2 = PeriodicGrid::new(2, 16, 2.0 * PI).unwrap();
        let z2 = PhaseVector::new(4.0, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(strichartz_global(&g2, &z2, 1, &s).is_err());
    }

    #[test]
    fn ascent_improves_the_ratio() {
        let g = PeriodicGrid::new(3, 32, 2.0 * PI).unwrap();
        let z = zeta(16.0);
        let r = strichartz_constant(&g, &z, DyadicIndex::new(2).unwrap(), 2, &Stream::new(3, "t", &[])).unwrap();
        assert!(r.get_extra("ratio").unwrap() > r.get_extra("random_ratio").unwrap());
        assert_eq!(r.get_extra("circle_truncated"), Some(1.0));
        let again = strichartz_constant(&g, &z, DyadicIndex::new(2).unwrap(), 2, &Stream::new(3, "t", &[])).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn global_ratio_is_scale_invariant_and_finite() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let z = zeta(4.0);
        let r = strichartz_global(&g, &z, 10, &Stream::new(5, "t", &[])).unwrap();
        assert!(r.constant.is_finite() && r.constant > 0.0);
        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        let f = gaussian_spectrum(&g, None, &mut Stream::new(9, "u", &[]).rng(0));
        let a = ratio(&f, &table, 6.0).unwrap();
        let b = ratio(&f.scale(Complex64::new(0.0, 3.0)), &table, 6.0).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }
}
