//! Scalar evaluation of the dyadic double sums that control the
//! low-modulation part of `m_{∇f}`.
//!
//! For dyadic `μ ≤ ν ≤ τ/8` the building block is
//! `B_{μ,ν} = τ^{−(1−θ)/n−θ/2−1/2} μ^{(1−θ)/n−θ/2} ν^{−1/2}`, and for each
//! dyadic `λ ≤ 100τ` two bilinear sums are formed:
//!
//! - below `λ`: `Σ_{μ≤ν≤τ/8, ν<λ} (ν/λ)^{(1−θ)/n} B_{μ,ν} a_μ b_ν`, to be
//!   bounded by `C (λ/τ)^α λ^{s−2} ‖a‖‖b‖`;
//! - above `λ`: `Σ_{μ≤ν, λ≤ν<τ/8} B_{μ,ν} a_μ b_ν`, to be bounded by
//!   `C λ^{−1} (λ/τ)^α ‖a‖‖b‖`.
//!
//! The smallest constant at a given `τ` is the `ℓ² → ℓ²` norm of the kernel,
//! computed exactly by SVD.

use nalgebra::DMatrix;

use super::{log_log_slope, EstimateReport};
use crate::error::{Error, Result};

/// `τ` used to approximate the `τ → ∞` limit of the constants.
pub const LIMIT_EXPONENT: u32 = 50;

/// `(s, p)` of the admissible conductivity class in dimension `n`.
pub fn regularity_exponents(n: usize, theta: f64) -> Result<(f64, f64)> {
    let bad = |reason: String| Err(Error::InvalidParameter { name: "theta", reason });
    if !(0.0..1.0).contains(&theta) {
        return bad(format!("need theta in [0, 1), got {theta}"));
    }
    match n {
        3 | 4 if theta == 0.0 => Ok((1.0, n as f64)),
        3 | 4 => bad(format!("n = {n} requires theta = 0, got {theta}")),
        5 | 6 => {
            let nf = n as f64;
            Ok((1.0 + (1.0 - theta) * (0.5 - 2.0 / nf), nf / (1.0 - theta)))
        }
        _ => Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 3 <= n <= 6, got {n}"),
        }),
    }
}

/// Exponents `α` for the sums below and above `λ`.
pub fn alphas(n: usize, theta: f64) -> (f64, f64) {
    let nf = n as f64;
    let full = (1.0 - theta) / nf + theta / 2.0 + 0.5;
    let below = match n {
        3 => 2.0 / 3.0,
        4 => 0.75,
        _ => full,
    };
    (below, full)
}

pub fn block(mu: f64, nu: f64, tau: f64, n: usize, theta: f64) -> f64 {
    let nf = n as f64;
    let a = (1.0 - theta) / nf;
    tau.powf(-a - theta / 2.0 - 0.5) * mu.powf(a - theta / 2.0) * nu.powf(-0.5)
}

fn dyadics_upto(limit: f64, strict: bool) -> Vec<f64> {
    (0..200)
        .map(|k| 2f64.powi(k))
        .take_while(|&v| if strict { v < limit } else { v <= limit })
        .collect()
}

fn operator_norm(rows: &[f64], cols: &[f64], k: impl Fn(f64, f64) -> f64) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (mu, nu) = (rows[i], cols[j]);
        if mu <= nu {
            k(mu, nu)
        } else {
            0.0
        }
    });
    m.singular_values().max()
}

/// Norm of the kernel of the sum below `λ`.
pub fn below_norm(lambda: f64, tau: f64, n: usize, theta: f64) -> f64 {
    let nus: Vec<f64> = dyadics_upto(tau / 8.0, false).into_iter().filter(|&v| v < lambda).collect();
    let a = (1.0 - theta) / n as f64;
    operator_norm(&nus, &nus, |mu, nu| (nu / lambda).powf(a) * block(mu, nu, tau, n, theta))
}

/// Norm of the kernel of the sum above `λ`.
pub fn above_norm(lambda: f64, tau: f64, n: usize, theta: f64) -> f64 {
    let nus: Vec<f64> = dyadics_upto(tau / 8.0, true).into_iter().filter(|&v| v >= lambda).collect();
    let mus = dyadics_upto(tau / 8.0, false);
    operator_norm(&mus, &nus, |mu, nu| block(mu, nu, tau, n, theta))
}

/// Per-`τ` constants and fitted `λ`-exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicRow {
    pub tau: f64,
    pub below_constant: f64,
    pub above_constant: f64,
    /// Slope of the normalized below-sum norm against `λ/τ` on `[τ/4, 100τ]`.
    pub below_slope: f64,
    /// Slope of the normalized above-sum norm against `λ/τ` on `[1, τ/16]`.
    pub above_slope: f64,
}

fn row(k: u32, n: usize, theta: f64, s: f64, alpha: (f64, f64)) -> DyadicRow {
    let tau = 2f64.powi(k as i32);
    let lambdas = dyadics_upto(100.0 * tau, false);
    let (mut below_c, mut above_c) = (0.0f64, 0.0f64);
    let (mut bx, mut by, mut ax, mut ay) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &l in &lambdas {
        let r = l / tau;
        let below = below_norm(l, tau, n, theta);
        if below > 0.0 {
            let g = below / l.powf(s - 2.0);
            below_c = below_c.max(g / r.powf(alpha.0));
            if l >= tau / 4.0 {
                bx.push(r);
                by.push(g);
            }
        }
        let above = above_norm(l, tau, n, theta);
        if above > 0.0 {
            let g = above * l;
            above_c = above_c.max(g / r.powf(alpha.1));
            if l <= tau / 16.0 {
                ax.push(r);
                ay.push(g);
            }
        }
    }
    let slope = |x: &[f64], y: &[f64]| if x.len() >= 2 { log_log_slope(x, y) } else { f64::NAN };
    DyadicRow {
        tau,
        below_constant: below_c,
        above_constant: above_c,
        below_slope: slope(&bx, &by),
        above_slope: slope(&ax, &ay),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSums {
    pub n: usize,
    pub theta: f64,
    pub s: f64,
    pub p: f64,
    pub alpha_below: f64,
    pub alpha_above: f64,
    pub rows: Vec<DyadicRow>,
    /// Constants at `τ = 2^LIMIT_EXPONENT`.
    pub limit: DyadicRow,
    pub below: EstimateReport,
    pub above: EstimateReport,
}

/// `(max − min) / max`.
pub fn relative_variation(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

/// Evaluates both sums for `τ = 2^k`, `k` in `tau_exponents`.
pub fn verify_dyadic_sums(n: usize, theta: f64, tau_exponents: &[u32]) -> Result<DyadicSums> {
    let (s, p) = regularity_exponents(n, theta)?;
    if tau_exponents.is_empty() || tau_exponents.iter().any(|&k| !(3..=LIMIT_EXPONENT).contains(&k)) {
        return Err(Error::InvalidParameter {
            name: "tau_range",
            reason: format!("exponents must lie in 3..={LIMIT_EXPONENT}"),
        });
    }
    let alpha = alphas(n, theta);
    let rows: Vec<DyadicRow> = tau_exponents.iter().map(|&k| row(k, n, theta, s, alpha)).collect();
    let limit = row(LIMIT_EXPONENT, n, theta, s, alpha);
    let summarize = |name: &str, pick: fn(&DyadicRow) -> f64, slope: fn(&DyadicRow) -> f64, a: f64, lim: f64| {
        let c: Vec<f64> = rows.iter().map(pick).collect();
        let slopes: Vec<f64> = rows.iter().map(slope).filter(|v| v.is_finite()).collect();
        let mean_slope = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
        let worst = slopes.iter().map(|v| (v - a).abs()).fold(0.0, f64::max);
        EstimateReport::new(name, rows.len(), 1).and_then(|r| {
            r.param("n", n as f64)
                .param("theta", theta)
                .param("alpha", a)
                .extra("variation", relative_variation(&c))
                .extra("min_constant", c.iter().cloned().fold(f64::INFINITY, f64::min))
                .extra("limit_constant", lim)
                .extra("slope", mean_slope)
                .extra("slope_deviation", worst)
                .finish(c.iter().cloned().fold(0.0, f64::max), relative_variation(&c))
        })
    };
    let below = summarize("dyadic_below", |r| r.below_constant, |r| r.below_slope, alpha.0, limit.below_constant)?;
    let above = summarize("dyadic_above", |r| r.above_constant, |r| r.above_slope, alpha.1, limit.above_constant)?;
    Ok(DyadicSums {
        n,
        theta,
        s,
        p,
        alpha_below: alpha.0,
        alpha_above: alpha.1,
        rows,
        limit,
        below,
        above,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_classes() {
        assert_eq!(regularity_exponents(3, 0.0).unwrap(), (1.0, 3.0));
        assert_eq!(regularity_exponents(4, 0.0).unwrap(), (1.0, 4.0));
        let (s, p) = regularity_exponents(6, 0.5).unwrap();
        assert!((s - (1.0 + 0.5 / 6.0)).abs() < 1e-15 && (p - 12.0).abs() < 1e-12);
        assert!(regularity_exponents(3, 0.5).is_err());
        assert!(regularity_exponents(7, 0.0).is_err());
        assert!(regularity_exponents(5, 1.0).is_err());
    }

    #[test]
    fn three_dimensional_kernel_factorization() {
        // (ν/λ)^{1/3} B = (μ/ν)^{1/3} (ν/τ)^{1/6} (λ/τ)^{2/3} λ^{-1}
        for (mu, nu, lambda, tau) in [(1.0, 4.0, 32.0, 64.0), (2.0, 2.0, 8.0, 1024.0), (4.0, 16.0, 512.0, 128.0)] {
            let lhs = (nu / lambda as f64).powf(1.0 / 3.0) * block(mu, nu, tau, 3, 0.0);
            let rhs = (mu / nu as f64).powf(1.0 / 3.0) * (nu / tau as f64).powf(1.0 / 6.0) * (lambda / tau as f64).powf(2.0 / 3.0) / lambda;
            assert!((lhs - rhs).abs() < 1e-14 * rhs);
        }
        // n = 4: (ν/λ)^{1/4} B = (μ/ν)^{1/4} (λ/τ)^{3/4} λ^{-1}
        let (mu, nu, lambda, tau) = (2.0f64, 8.0f64, 64.0f64, 256.0f64);
        let lhs = (nu / lambda).powf(0.25) * block(mu, nu, tau, 4, 0.0);
        let rhs = (mu / nu).powf(0.25) * (lambda / tau).powf(0.75) / lambda;
        assert!((lhs - rhs).abs() < 1e-14 * rhs);
    }

    /// The operator norm by brute-force power iteration on a dense kernel.
    fn power_norm(rows: &[f64], cols: &[f64], k: impl Fn(f64, f64) -> f64) -> f64 {
        let m: Vec<Vec<f64>> = rows
            .iter()
            .map(|&mu| cols.iter().map(|&nu| if mu <= nu { k(mu, nu) } else { 0.0 }).collect())
            .collect();
        let mut x = vec![1.0; cols.len()];
        let mut est = 0.0;
        for _ in 0..2000 {
            let y: Vec<f64> = m.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
            let z: Vec<f64> = (0..cols.len()).map(|j| m.iter().zip(&y).map(|(r, v)| r[j] * v).sum()).collect();
            let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            est = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = z.iter().map(|v| v / n).collect();
        }
        est
    }

    #[test]
    fn svd_norm_matches_power_iteration() {
        let tau = 1024.0;
        let nus: Vec<f64> = dyadics_upto(tau / 8.0, false).into_iter().filter(|&v| v < 512.0).collect();
        let want = power_norm(&nus, &nus, |mu, nu| (nu / 512.0f64).powf(1.0 / 3.0) * block(mu, nu, tau, 3, 0.0));
        assert!((below_norm(512.0, tau, 3, 0.0) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn saturated_slopes_equal_the_exponents() {
        let d = verify_dyadic_sums(3, 0.0, &[6, 10, 14]).unwrap();
        for r in &d.rows {
            assert!((r.below_slope - 2.0 / 3.0).abs() < 1e-9, "{r:?}");
        }
        let d = verify_dyadic_sums(4, 0.0, &[8]).unwrap();
        assert!((d.rows[0].below_slope - 0.75).abs() < 1e-9);
    }

    #[test]
    fn constants_are_bounded_by_their_limit() {
        for (n, theta) in [(3, 0.0), (4, 0.0), (5, 0.9), (6, 0.9)] {
            let d = verify_dyadic_sums(n, theta, &[6, 8, 12, 16, 20]).unwrap();
            for r in &d.rows {
                assert!(r.below_constant <= d.limit.below_constant * (1.0 + 1e-9), "n={n} {r:?}");
                assert!(r.below_constant.is_finite() && r.above_constant.is_finite());
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(verify_dyadic_sums(3, 0.0, &[]).is_err());
        assert!(verify_dyadic_sums(3, 0.0, &[2]).is_err());
        assert!(verify_dyadic_sums(3, 0.2, &[6]).is_err());
    }
}
