//! Averages over rotations (and over `τ`) of directional and `Ẋ^{-1/2}_ζ`
//! norms.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::haar::{haar_at, sample_haar};
use super::rng::Stream;
use super::{mean_std, EstimateReport};
use crate::error::{Error, Result};
use crate::phase::{cumulative_multiplier, lp_projection, symbol_p, DyadicIndex, PhaseVector};
use crate::spectral::{forward_transform, inverse_transform, lp_norm, Field, PeriodicGrid, SpectralField};

/// Non-zero coefficients with their frequencies.
struct Support {
    grid: PeriodicGrid,
    index: Vec<usize>,
    freq: Vec<Vec<f64>>,
    coeff: Vec<Complex64>,
}

impl Support {
    fn of(f: &SpectralField) -> Self {
        let grid = f.grid().clone();
        let mut xi = vec![0.0; grid.dim()];
        let (mut index, mut freq, mut coeff) = (Vec::new(), Vec::new(), Vec::new());
        for (i, c) in f.coeffs().iter().enumerate() {
            if c.norm_sqr() > 0.0 {
                grid.frequency(i, &mut xi);
                index.push(i);
                freq.push(xi.clone());
                coeff.push(*c);
            }
        }
        Self {
            grid,
            index,
            freq,
            coeff,
        }
    }

    /// `Σ w(ξ)|c(ξ)|²` times the box volume.
    fn weighted_sq<F: Fn(&[f64]) -> f64>(&self, w: F) -> f64 {
        let s: f64 = self
            .freq
            .iter()
            .zip(&self.coeff)
            .map(|(xi, c)| w(xi) * c.norm_sqr())
            .sum();
        s * self.grid.volume()
    }

    fn field_with<F: Fn(&[f64]) -> f64>(&self, m: F) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid);
        let coeffs = out.coeffs_mut();
        for ((&i, xi), c) in self.index.iter().zip(&self.freq).zip(&self.coeff) {
            coeffs[i] = c * m(xi);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Monte-Carlo estimate of `‖A_{λ,ν}‖_{L^p(O(n))}` with
/// `A_{λ,ν}(U) = (λ/ν)^{1/p}‖P_λ P^{Ue₁}_{≤ν} f‖_p`, relative to `‖f‖_p`.
///
/// `p = 2` is evaluated by Parseval on the support of `P_λ f`; other `p`
/// go through one inverse transform per rotation.
pub fn plane_avg(
    f: &Field,
    lambda: DyadicIndex,
    nu: DyadicIndex,
    p: f64,
    samples: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    if nu > lambda {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("need nu <= lambda, got nu = {} > {}", nu.value(), lambda.value()),
        });
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need p in [2, inf], got {p}"),
        });
    }
    let report = EstimateReport::new("plane_avg", samples, 1)?
        .param("lambda", lambda.as_f64())
        .param("nu", nu.as_f64())
        .param("p", p);
    let grid = f.grid();
    let n = grid.dim();
    let d0 = grid.cell();
    let f_norm = lp_norm(f, p)?;
    let support = Support::of(&lp_projection(&forward_transform(f), lambda));
    let stream = stream.child("plane_avg", &[lambda.as_f64(), nu.as_f64(), p]);

    let norms: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let omega = haar_at(n, &stream, i)?.column(0);
            let m = |xi: &[f64]| cumulative_multiplier(dot(xi, &omega).abs() / d0, nu);
            if p == 2.0 {
                Ok(support.weighted_sq(|xi| m(xi).powi(2)).sqrt())
            } else {
                lp_norm(&inverse_transform(&support.field_with(m)), p)
            }
        })
        .collect::<Result<_>>()?;

    let prefactor = if p.is_infinite() {
        1.0
    } else {
        (lambda.as_f64() / nu.as_f64()).powf(1.0 / p)
    };
    let average = |v: &[f64]| {
        if p.is_infinite() {
            v.iter().cloned().fold(0.0, f64::max)
        } else {
            (v.iter().map(|x| x.powf(p)).sum::<f64>() / v.len() as f64).powf(1.0 / p)
        }
    };
    let t_norm = average(&norms);
    let a: Vec<f64> = norms.iter().map(|t| prefactor * t).collect();
    let scale = if f_norm > 0.0 { 1.0 / f_norm } else { 0.0 };
    let (_, spread) = mean_std(&a);
    report
        .extra("f_norm", f_norm)
        .extra("projection_norm", t_norm * scale)
        .extra("max_sample", a.iter().cloned().fold(0.0, f64::max) * scale)
        .finish(prefactor * t_norm * scale, spread * scale)
}

/// Split `‖P_{≥c}f‖²_{Ḣ^{-1}}` and `‖P_{<c}f‖²_{Ḣ^{-1/2}}` with a sharp
/// cutoff at `|ξ| = c`; `|ξ|` is floored at one cell.
pub fn low_high_split(f: &SpectralField, cutoff: f64) -> (f64, f64) {
    let support = Support::of(f);
    let d0 = f.grid().cell();
    let r = |xi: &[f64]| dot(xi, xi).sqrt();
    let high = support.weighted_sq(|xi| {
        if r(xi) >= cutoff {
            r(xi).max(d0).powi(-2)
        } else {
            0.0
        }
    });
    let low = support.weighted_sq(|xi| if r(xi) < cutoff { 1.0 / r(xi).max(d0) } else { 0.0 });
    (high, low)
}

/// `‖f‖²_{Ẋ^{-1/2}_ζ}` over the non-zero coefficients only.
fn x_minus_half_sq(support: &Support, zeta: &PhaseVector) -> f64 {
    let floor = zeta.tau() * support.grid.cell();
    support.weighted_sq(|xi| 1.0 / symbol_p(zeta, xi).norm().max(floor))
}

/// Draws `(τ, U)` with `τ ~ U[M, 2M]` (drawn first) and `U` Haar.
pub fn draw_phase<R: Rng + ?Sized>(n: usize, m: f64, rng: &mut R) -> Result<PhaseVector> {
    let tau = m * (1.0 + rng.random::<f64>());
    let u = sample_haar(n, rng)?;
    PhaseVector::new(tau, u.column(0), u.column(1))
}

/// Monte-Carlo average over `τ ∈ [M, 2M]` and Haar `U` of
/// `‖f‖²_{Ẋ^{-1/2}_{ζ(τ,U)}}`, against
/// `‖P_{≥100M}f‖²_{Ḣ^{-1}} + M^{-1}‖P_{<100M}f‖²_{Ḣ^{-1/2}}`.
pub fn avg_qnorm(f: &Field, m: f64, samples: usize, stream: &Stream) -> Result<EstimateReport> {
    let grid = f.grid();
    let d0 = grid.cell();
    if !(m >= 4.0 * d0) {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("need M >= 4 cells ({}), got {m}", 4.0 * d0),
        });
    }
    if 2.0 * m > grid.nyquist() {
        return Err(Error::Nyquist {
            what: "2M",
            value: 2.0 * m,
            limit: grid.nyquist(),
        });
    }
    let report = EstimateReport::new("avg_qnorm", samples, 1)?.param("M", m);
    let fh = forward_transform(f);
    let support = Support::of(&fh);
    let stream = stream.child("avg_qnorm", &[m]);
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let zeta = draw_phase(grid.dim(), m, &mut stream.rng(i))?;
            Ok(x_minus_half_sq(&support, &zeta))
        })
        .collect::<Result<_>>()?;
    let (lhs, spread) = mean_std(&values);
    let (high, low) = low_high_split(&fh, 100.0 * m);
    let rhs = high + low / m;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let stderr = spread / (samples as f64).sqrt();
    report
        .extra("lhs", lhs)
        .extra("rhs", rhs)
        .extra("high_part", high)
        .extra("low_part", low)
        .finish(ratio, if rhs > 0.0 { stderr / rhs } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::inverse_transform;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(3, n, 2.0 * PI).unwrap()
    }

    fn random_band_field(g: &PeriodicGrid, lambda: DyadicIndex, seed: u64) -> Field {
        let keep: Vec<bool> = g.map_frequencies(|xi| crate::phase::lp_multiplier(xi.iter().map(|v| v * v).sum::<f64>().sqrt(), lambda) > 0.0);
        let mut rng = Stream::new(seed, "field", &[]).rng(0);
        inverse_transform(&super::super::gaussian_spectrum(g, Some(&keep), &mut rng))
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = grid(16);
        let f = Field::zeros(&g);
        let s = Stream::new(1, "t", &[]);
        let l = DyadicIndex::new(4).unwrap();
        assert!(plane_avg(&f, l, DyadicIndex::new(8).unwrap(), 2.0, 4, &s).is_err());
        assert!(plane_avg(&f, l, l, 1.5, 4, &s).is_err());
        assert!(avg_qnorm(&f, 2.0, 4, &s).is_err());
        assert!(matches!(avg_qnorm(&f, 5.0, 4, &s), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn single_direction_at_full_width() {
        // ν = λ keeps a coefficient whose directional frequency is at most λ.
        let g = grid(32);
        let lambda = DyadicIndex::new(8).unwrap();
        let fh = SpectralField::mode(&g, &[8, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        let f = inverse_transform(&fh);
        let r = plane_avg(&f, lambda, lambda, 2.0, 64, &Stream::new(3, "t", &[])).unwrap();
        // P_λ is the identity at the band centre and P^ω_{≤λ} = 1 on |ξ·ω| ≤ λ.
        assert!((r.constant - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn p_infinity_ratio_is_recorded() {
        let g = grid(16);
        let lambda = DyadicIndex::new(4).unwrap();
        let f = random_band_field(&g, lambda, 2);
        let r = plane_avg(&f, lambda, DyadicIndex::new(2).unwrap(), f64::INFINITY, 16, &Stream::new(3, "t", &[])).unwrap();
        assert!(r.constant > 0.0 && r.constant < 10.0, "{r:?}");
        let again = plane_avg(&f, lambda, DyadicIndex::new(2).unwrap(), f64::INFINITY, 16, &Stream::new(3, "t", &[])).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn p2_matches_the_transform_route() {
        let g = grid(16);
        let lambda = DyadicIndex::new(4).unwrap();
        let nu = DyadicIndex::new(1).unwrap();
        let f = random_band_field(&g, lambda, 5);
        let s = Stream::new(8, "t", &[]);
        let r = plane_avg(&f, lambda, nu, 2.0, 8, &s).unwrap();
        // Same rotations, evaluated with a transform per sample.
        let fh = lp_projection(&forward_transform(&f), lambda);
        let child = s.child("plane_avg", &[4.0, 1.0, 2.0]);
        let mut acc = 0.0;
        for i in 0..8 {
            let w = haar_at(3, &child, i).unwrap().column(0);
            let proj = crate::phase::directional_projection(&fh, &w, crate::phase::DirectionalBand::AtMost(nu)).unwrap();
            acc += lp_norm(&inverse_transform(&proj), 2.0).unwrap().powi(2);
        }
        let want = 2.0 * (acc / 8.0).sqrt() / lp_norm(&f, 2.0).unwrap();
        assert!((r.constant - want).abs() < 1e-10 * want);
    }

    /// Dense midpoint quadrature over `τ ∈ [M, 2M]` and the unit sphere of
    /// `|c|² vol / max(|p_ζ(ξ₀)|, τ d₀)`; for one coefficient the Haar
    /// average reduces to the sphere average over `U^T ξ̂₀`.
    fn single_coefficient_oracle(xi0: [f64; 3], m: f64, d0: f64, vol: f64) -> f64 {
        let (nt, nth, nph) = (24, 400, 200);
        let r = (xi0[0] * xi0[0] + xi0[1] * xi0[1] + xi0[2] * xi0[2]).sqrt();
        let mut acc = 0.0;
        for it in 0..nt {
            let tau = m * (1.0 + (it as f64 + 0.5) / nt as f64);
            for ic in 0..nth {
                // ω = (sin θ cos φ, sin θ sin φ, cos θ), uniform in cos θ.
                let c = -1.0 + 2.0 * (ic as f64 + 0.5) / nth as f64;
                let s = (1.0 - c * c).sqrt();
                for ip in 0..nph {
                    let ph = 2.0 * PI * (ip as f64 + 0.5) / nph as f64;
                    let (w1, w2) = (s * ph.cos(), s * ph.sin());
                    let p = Complex64::new(-r * r + 2.0 * tau * r * w2, 2.0 * tau * r * w1);
                    acc += 1.0 / p.norm().max(tau * d0);
                }
            }
        }
        vol * acc / (nt * nth * nph) as f64
    }

    #[test]
    fn single_low_coefficient_against_quadrature() {
        let g = grid(32);
        let m = 8.0;
        let fh = SpectralField::mode(&g, &[1, 1, 0], Complex64::new(1.0, 0.0)).unwrap();
        let f = inverse_transform(&fh);
        let r = avg_qnorm(&f, m, 4000, &Stream::new(21, "t", &[])).unwrap();
        let oracle = single_coefficient_oracle([1.0, 1.0, 0.0], m, 1.0, g.volume());
        let lhs = r.get_extra("lhs").unwrap();
        assert!((lhs - oracle).abs() < 0.05 * oracle, "mc {lhs} quadrature {oracle}");
        assert!(r.constant > 0.1 && r.constant < 10.0);
        // Doubling M halves the average for a fixed low-frequency field.
        let g64 = grid(64);
        let f64_ = inverse_transform(&SpectralField::mode(&g64, &[1, 1, 0], Complex64::new(1.0, 0.0)).unwrap());
        let a = avg_qnorm(&f64_, 8.0, 2000, &Stream::new(2, "t", &[])).unwrap();
        let b = avg_qnorm(&f64_, 16.0, 2000, &Stream::new(2, "t", &[])).unwrap();
        let q = b.get_extra("lhs").unwrap() / a.get_extra("lhs").unwrap();
        assert!((q - 0.5).abs() < 0.15, "{q}");
    }

    #[test]
    fn high_frequency_weight_bound() {
        // |p_ζ(ξ)| ≥ |ξ|² − 2τ|ξ|, so far from Σ_ζ the average is controlled
        // by the Ḣ^{-1} norm.
        let g = grid(64);
        let m = 4.0;
        let k = [30i64, 30, 30];
        let f = inverse_transform(&SpectralField::mode(&g, &k, Complex64::new(1.0, 0.0)).unwrap());
        let r = avg_qnorm(&f, m, 200, &Stream::new(4, "t", &[])).unwrap();
        let xi = (3.0f64 * 900.0).sqrt();
        let h_minus_one = g.volume() / (xi * xi);
        let bound = h_minus_one / (1.0 - 2.0 * 2.0 * m / xi);
        assert!(r.get_extra("lhs").unwrap() <= bound, "{r:?}");
    }
}
