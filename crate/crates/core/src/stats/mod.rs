//! Haar sampling on `O(n)` and Monte-Carlo measurement of the constants in
//! the Strichartz, averaging, localization, phase-stability and bilinear
//! estimates, plus a scalar check of the dyadic sums behind the bilinear
//! bound.
//!
//! Every sampled quantity draws from a [`Stream`]: sample `i` gets its own
//! generator, so rayon can evaluate samples in any order.

pub mod averaging;
pub mod bilinear;
pub mod dyadic;
pub mod haar;
pub mod ks;
pub mod rng;
pub mod strichartz;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase::{lp_projection, DyadicIndex};
use crate::spaces::active_bands;
use crate::spectral::{forward_transform, inverse_transform, lp_norm, Field, PeriodicGrid, SpectralField};

pub use averaging::{avg_qnorm, plane_avg};
pub use bilinear::{
    bilinear_norm, localization_ratios, verify_localization, verify_zeta_stability, BilinearNorm,
    CutoffSpec, Multiplier, NormEstimate, PowerOptions,
};
pub use dyadic::{verify_dyadic_sums, DyadicSums};
pub use haar::{haar_at, sample_haar, OrthogonalSample};
pub use ks::{ks_one_sample, ks_two_sample, sphere_marginal_cdf, KsResult};
pub use rng::{stream_seed, Stream};
pub use strichartz::{
    band_strichartz_ratio, strichartz_band_scaling, strichartz_constant, strichartz_global,
};

/// A measured constant with the parameters and sampling behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub quantity: String,
    pub parameters: Vec<(String, f64)>,
    pub constant: f64,
    pub samples: usize,
    pub dispersion: f64,
    pub extras: Vec<(String, f64)>,
}

impl EstimateReport {
    /// Fails when fewer than `min_samples` samples were taken.
    pub fn new(quantity: &str, samples: usize, min_samples: usize) -> Result<Self> {
        if samples < min_samples {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: format!("{quantity} needs at least {min_samples} samples, got {samples}"),
            });
        }
        Ok(Self {
            quantity: quantity.to_string(),
            parameters: Vec::new(),
            constant: 0.0,
            samples,
            dispersion: 0.0,
            extras: Vec::new(),
        })
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.parameters.push((name.to_string(), value));
        self
    }

    pub fn extra(mut self, name: &str, value: f64) -> Self {
        self.extras.push((name.to_string(), value));
        self
    }

    pub fn get_param(&self, name: &str) -> Option<f64> {
        lookup(&self.parameters, name)
    }

    pub fn get_extra(&self, name: &str) -> Option<f64> {
        lookup(&self.extras, name)
    }

    /// Sets the constant and dispersion; a non-finite dispersion is an error.
    pub fn finish(mut self, constant: f64, dispersion: f64) -> Result<Self> {
        if !dispersion.is_finite() {
            return Err(Error::Precondition(format!(
                "{}: dispersion is not finite",
                self.quantity
            )));
        }
        self.constant = constant;
        self.dispersion = dispersion;
        Ok(self)
    }
}

fn lookup(list: &[(String, f64)], name: &str) -> Option<f64> {
    list.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Sample mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Independent complex Gaussian coefficients, zeroed outside `keep`.
///
/// One pair of normals is drawn per lattice site whether kept or not, so
/// masks never shift the stream.
pub fn gaussian_spectrum<R: Rng + ?Sized>(
    grid: &PeriodicGrid,
    keep: Option<&[bool]>,
    rng: &mut R,
) -> SpectralField {
    let coeffs = (0..grid.len())
        .map(|i| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if keep.is_none_or(|k| k[i]) {
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    SpectralField::new(grid.clone(), coeffs).expect("length matches grid")
}

/// Real random dyadic series `Σ_λ a·λ^{-s} g_λ/‖g_λ‖_p` with `g_λ = P_λ` of
/// white noise (`λ` in cells). Returns the field and the per-band norms
/// `‖P_λ f‖_p` actually achieved.
pub fn dyadic_random_series<R: Rng + ?Sized>(
    grid: &PeriodicGrid,
    s: f64,
    p: f64,
    amplitude: f64,
    rng: &mut R,
) -> Result<(Field, Vec<(DyadicIndex, f64)>)> {
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    let nh = forward_transform(&Field::from_real(grid.clone(), &noise)?);
    let bands: Vec<DyadicIndex> = active_bands(grid)
        .into_iter()
        .filter(|l| l.as_f64() <= grid.nyquist() / grid.cell())
        .collect();
    let mut total = SpectralField::zeros(grid);
    for &lambda in &bands {
        let piece = lp_projection(&nh, lambda);
        let norm = lp_norm(&inverse_transform(&piece), p)?;
        if norm > 0.0 {
            let c = amplitude * lambda.as_f64().powf(-s) / norm;
            total = total.add(&piece.scale(Complex64::new(c, 0.0)))?;
        }
    }
    let field = inverse_transform(&total).map(|v| Complex64::new(v.re, 0.0));
    let fh = forward_transform(&field);
    let profile = bands
        .iter()
        .map(|&l| Ok((l, lp_norm(&inverse_transform(&lp_projection(&fh, l)), p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((field, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn report_invariants() {
        assert!(EstimateReport::new("x", 3, 4).is_err());
        let r = EstimateReport::new("x", 4, 4).unwrap().param("tau", 2.0).extra("a", 1.5);
        assert_eq!(r.get_param("tau"), Some(2.0));
        assert_eq!(r.get_extra("a"), Some(1.5));
        assert_eq!(r.get_extra("b"), None);
        assert!(r.clone().finish(1.0, f64::NAN).is_err());
        assert_eq!(r.finish(2.0, 0.1).unwrap().constant, 2.0);
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.7)).collect();
        assert!((log_log_slope(&x, &y) + 0.7).abs() < 1e-12);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn masked_spectrum_keeps_the_stream() {
        let g = PeriodicGrid::new(2, 8, 2.0 * PI).unwrap();
        let keep: Vec<bool> = (0..g.len()).map(|i| i % 3 == 0).collect();
        let a = gaussian_spectrum(&g, None, &mut ChaCha8Rng::seed_from_u64(1));
        let b = gaussian_spectrum(&g, Some(&keep), &mut ChaCha8Rng::seed_from_u64(1));
        for i in 0..g.len() {
            if keep[i] {
                assert_eq!(a.coeffs()[i], b.coeffs()[i]);
            } else {
                assert_eq!(b.coeffs()[i].norm(), 0.0);
            }
        }
    }

    #[test]
    fn dyadic_series_profile() {
        let g = PeriodicGrid::new(3, 32, 2.0 * PI).unwrap();
        let (f, profile) = dyadic_random_series(&g, 1.0, 3.0, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(f.max_imag() == 0.0);
        let mid: Vec<&(DyadicIndex, f64)> = profile.iter().filter(|(l, _)| (2..=8).contains(&l.value())).collect();
        let x: Vec<f64> = mid.iter().map(|(l, _)| l.as_f64()).collect();
        let y: Vec<f64> = mid.iter().map(|(_, v)| *v).collect();
        assert!((log_log_slope(&x, &y) + 1.0).abs() < 0.2);
    }
}
