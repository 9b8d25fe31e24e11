//! Norms: the Bourgain-type `X^b_ζ` / `Ẋ^b_ζ`, the semiclassical `H^s_τ`,
//! homogeneous Sobolev norms and a dyadic Besov surrogate for `W^{s,p}`.
//!
//! All spectral norms carry the Parseval factor `L^{n/2}`, so at `b = 0`
//! they coincide with the physical `L²` norm.

use crate::error::{Error, Result};
use crate::phase::{lp_projection, symbol_p, DyadicIndex, PhaseVector, SymbolTable};
use crate::spectral::{forward_transform, inverse_transform, lp_norm, Field, SpectralField};

/// Default floor for homogeneous weights, in lattice cells.
pub const DEFAULT_FLOOR_CELLS: f64 = 1.0;

/// A norm together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    XInhom { zeta: PhaseVector, b: f64 },
    XHom { zeta: PhaseVector, b: f64, floor_cells: f64 },
    HTau { s: f64, tau: f64 },
    Lp { p: f64 },
    BesovSp { s: f64, p: f64 },
}

impl NormSpec {
    pub fn evaluate(&self, f: &Field) -> Result<f64> {
        match self {
            Self::XInhom { zeta, b } => x_norm(&forward_transform(f), zeta, *b, false),
            Self::XHom { zeta, b, floor_cells } => {
                let table = SymbolTable::new(f.grid(), zeta, *floor_cells)?;
                x_norm_with(&forward_transform(f), &table, *b, true)
            }
            Self::HTau { s, tau } => h_tau_norm(&forward_transform(f), *s, *tau),
            Self::Lp { p } => lp_norm(f, *p),
            Self::BesovSp { s, p } => besov_sp_norm(f, *s, *p),
        }
    }
}

fn weighted<F>(f: &SpectralField, weight: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let w = f.grid().map_frequencies(weight);
    f.weighted_l2(&w)
}

/// `‖|p_ζ|^b û‖` with the floored weight (homogeneous, one-cell floor) or
/// `‖(|p_ζ| + τ)^b û‖` (inhomogeneous).
pub fn x_norm(f: &SpectralField, zeta: &PhaseVector, b: f64, homogeneous: bool) -> Result<f64> {
    if zeta.dim() != f.grid().dim() {
        return Err(Error::GridMismatch);
    }
    let tau = zeta.tau();
    let floor = tau * f.grid().cell() * DEFAULT_FLOOR_CELLS;
    Ok(if homogeneous {
        weighted(f, |xi| symbol_p(zeta, xi).norm().max(floor).powf(b))
    } else {
        weighted(f, |xi| (symbol_p(zeta, xi).norm() + tau).powf(b))
    })
}

/// [`x_norm`] against a precomputed table (homogeneous weights use the
/// table's floor).
pub fn x_norm_with(f: &SpectralField, table: &SymbolTable, b: f64, homogeneous: bool) -> Result<f64> {
    table.grid().check_same(f.grid())?;
    Ok(f.weighted_l2(&table.weight_power(b, homogeneous)))
}

/// `‖(|ξ|² + τ²)^{s/2} û‖`.
pub fn h_tau_norm(f: &SpectralField, s: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be positive, got {tau}"),
        });
    }
    Ok(weighted(f, |xi| {
        (xi.iter().map(|v| v * v).sum::<f64>() + tau * tau).powf(s / 2.0)
    }))
}

/// `‖|ξ|^s û‖` with `|ξ|` floored at one lattice cell, so the zero mode is
/// finite for negative `s`.
pub fn homogeneous_sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let d0 = f.grid().cell();
    weighted(f, |xi| xi.iter().map(|v| v * v).sum::<f64>().sqrt().max(d0).powf(s))
}

/// Dyadic indices whose Littlewood–Paley piece can be non-zero on the grid.
pub fn active_bands(grid: &crate::spectral::PeriodicGrid) -> Vec<DyadicIndex> {
    let top = grid.nyquist() * (grid.dim() as f64).sqrt() / grid.cell();
    let last = DyadicIndex::covering(top).value() * 2;
    (0..64)
        .map(DyadicIndex::from_exponent)
        .take_while(|l| l.value() <= last)
        .collect()
}

/// `(Σ_λ [λ^s ‖P_λ f‖_p]^p)^{1/p}` with `λ` in cell units.
pub fn besov_sp_norm(f: &Field, s: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need 1 <= p < inf, got {p}"),
        });
    }
    let fh = forward_transform(f);
    let mut acc = 0.0;
    for lambda in active_bands(f.grid()) {
        let piece = lp_norm(&inverse_transform(&lp_projection(&fh, lambda)), p)?;
        acc += (lambda.as_f64().powf(s) * piece).powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn zeta(tau: f64) -> PhaseVector {
        PhaseVector::new(tau, vec![0.6, 0.8, 0.0], vec![0.0, 0.0, 1.0]).unwrap()
    }

    fn random_spectrum(grid: &PeriodicGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..grid.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        SpectralField::new(grid.clone(), coeffs).unwrap()
    }

    #[test]
    fn single_coefficient_weights() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let z = zeta(6.0);
        let k = [2i64, -1, 3];
        let c = Complex64::new(0.3, -0.4);
        let f = SpectralField::mode(&g, &k, c).unwrap();
        let xi = [2.0, -1.0, 3.0];
        let vol = g.volume().sqrt();
        for b in [-0.5, 0.5, 1.3] {
            let want = 0.5 * (symbol_p(&z, &xi).norm() + 6.0).powf(b) * vol;
            assert_relative_eq!(x_norm(&f, &z, b, false).unwrap(), want, max_relative = 1e-13);
        }
        assert_relative_eq!(x_norm(&f, &z, 0.0, true).unwrap(), f.l2_norm(), max_relative = 1e-14);
        assert_relative_eq!(x_norm(&f, &z, 0.0, false).unwrap(), f.l2_norm(), max_relative = 1e-14);
    }

    #[test]
    fn inhomogeneous_dominates_off_floor() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let z = zeta(6.0 * (1.0 + 2f64.sqrt() * 1e-6));
        let table = SymbolTable::new(&g, &z, 1.0).unwrap();
        let f = random_spectrum(&g, 1).masked(&table.floored().iter().map(|b| !b).collect::<Vec<_>>());
        assert!(x_norm(&f, &z, 0.5, false).unwrap() >= x_norm(&f, &z, 0.5, true).unwrap());
        assert_relative_eq!(
            x_norm(&f, &z, 0.5, true).unwrap(),
            x_norm_with(&f, &table, 0.5, true).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn h_tau_examples() {
        let g = PeriodicGrid::new(3, 16, 2.0 * PI).unwrap();
        let one = SpectralField::mode(&g, &[0, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(h_tau_norm(&one, 0.0, 3.0).unwrap(), one.l2_norm());
        assert_relative_eq!(h_tau_norm(&one, 1.0, 3.0).unwrap(), 3.0 * one.l2_norm(), max_relative = 1e-14);
        let wave = SpectralField::mode(&g, &[0, 4, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(
            h_tau_norm(&wave, 1.0, 4.0).unwrap(),
            2f64.sqrt() * 4.0 * wave.l2_norm(),
            max_relative = 1e-14
        );
        assert!(h_tau_norm(&wave, 1.0, 0.0).is_err());
    }

    #[test]
    fn besov_examples() {
        let g = PeriodicGrid::new(3, 32, 2.0 * PI).unwrap();
        let wave = inverse_transform(&SpectralField::mode(&g, &[0, 8, 0], Complex64::new(1.0, 0.0)).unwrap());
        let single = besov_sp_norm(&wave, 0.0, 3.0).unwrap();
        let piece = lp_norm(
            &inverse_transform(&lp_projection(&forward_transform(&wave), DyadicIndex::new(8).unwrap())),
            3.0,
        )
        .unwrap();
        // |k| = 8 is the centre of band 8 and invisible to bands 4 and 16.
        assert_relative_eq!(single, piece, max_relative = 1e-12);
        let weighted = besov_sp_norm(&wave, 1.5, 3.0).unwrap();
        let scale = 8f64.powf(1.5) * g.volume().powf(1.0 / 3.0);
        assert!(weighted > 0.25 * scale && weighted < 4.0 * scale);
        let doubled = besov_sp_norm(&wave.scale(Complex64::new(0.0, -2.0)), 1.5, 3.0).unwrap();
        assert_relative_eq!(doubled, 2.0 * weighted, max_relative = 1e-12);
    }

    #[test]
    fn norm_spec_dispatch() {
        let g = PeriodicGrid::new(3, 8, 2.0 * PI).unwrap();
        let f = inverse_transform(&random_spectrum(&g, 4));
        let z = zeta(3.0);
        let direct = x_norm(&forward_transform(&f), &z, -0.5, true).unwrap();
        let spec = NormSpec::XHom { zeta: z, b: -0.5, floor_cells: 1.0 };
        assert_relative_eq!(spec.evaluate(&f).unwrap(), direct, max_relative = 1e-13);
        assert_relative_eq!(
            NormSpec::Lp { p: 2.0 }.evaluate(&f).unwrap(),
            forward_transform(&f).l2_norm(),
            max_relative = 1e-12
        );
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn homogeneity_and_triangle(seed in 0u64..500, c in -4.0f64..4.0, b in -1.0f64..1.0) {
            let g = PeriodicGrid::new(3, 8, 2.0 * PI).unwrap();
            let z = zeta(2.5);
            let (u, v) = (random_spectrum(&g, seed), random_spectrum(&g, seed + 7));
            let w = u.add(&v).unwrap();
            let norms: Vec<Box<dyn Fn(&SpectralField) -> f64>> = vec![
                Box::new(|f| x_norm(f, &z, b, true).unwrap()),
                Box::new(|f| x_norm(f, &z, b, false).unwrap()),
                Box::new(|f| h_tau_norm(f, b, 2.5).unwrap()),
                Box::new(|f| homogeneous_sobolev_norm(f, b)),
                Box::new(|f| besov_sp_norm(&inverse_transform(f), b, 2.5).unwrap()),
            ];
            for n in &norms {
                let scaled = n(&u.scale(Complex64::new(c, 0.0)));
                proptest::prop_assert!((scaled - c.abs() * n(&u)).abs() <= 1e-10 * (1.0 + scaled));
                proptest::prop_assert!(n(&w) <= (n(&u) + n(&v)) * (1.0 + 1e-10));
            }
        }
    }
}
