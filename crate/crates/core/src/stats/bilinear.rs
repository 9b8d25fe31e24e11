//! Norms of multiplication operators between `X^{1/2}_ζ` and `X^{-1/2}_ζ`,
//! the localization constants and the equivalence of `X^b` norms under a
//! change of phase.

use num_complex::Complex64;
use rayon::prelude::*;

use super::rng::Stream;
use super::{gaussian_spectrum, mean_std, EstimateReport};
use crate::cgo::box_centre;
use crate::error::{Error, Result};
use crate::phase::{smooth_step, PhaseVector, SymbolTable};
use crate::spectral::{divergence, Field, PaddedMultiplier, PeriodicGrid, SpectralField};

/// The multiplier of a bilinear form `m(u, v) = ∫ m u v̄`.
#[derive(Debug, Clone)]
pub enum Multiplier {
    /// `m_f` for a scalar field.
    Scalar(Field),
    /// `m_{∇·F}` for a vector field `F`.
    Divergence(Vec<Field>),
}

impl Multiplier {
    pub fn field(&self) -> Result<Field> {
        match self {
            Self::Scalar(f) => Ok(f.clone()),
            Self::Divergence(v) => divergence(v),
        }
    }
}

/// Power iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub max_iter: usize,
    /// Relative change of the Rayleigh quotient that counts as converged.
    pub stagnation: f64,
    /// The multiplier must essentially vanish outside this radius around
    /// the box centre (fraction of `L`).
    pub support_fraction: f64,
    /// Allowed `sup |m|` outside the support ball relative to `sup |m|`.
    pub support_tol: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            stagnation: 1e-4,
            support_fraction: 0.375,
            support_tol: 1e-3,
        }
    }
}

/// An operator norm, or bounds on it when power iteration stalls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormEstimate {
    Point(f64),
    Interval { lo: f64, hi: f64 },
}

impl NormEstimate {
    /// The point value, or the upper end of the interval.
    pub fn value(&self) -> f64 {
        match *self {
            Self::Point(v) => v,
            Self::Interval { hi, .. } => hi,
        }
    }

    pub fn lower(&self) -> f64 {
        match *self {
            Self::Point(v) => v,
            Self::Interval { lo, .. } => lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearNorm {
    pub estimate: NormEstimate,
    pub iterations: usize,
    pub report: EstimateReport,
}

fn check_support(m: &Field, fraction: f64, tol: f64) -> Result<()> {
    let grid = m.grid();
    let radius = fraction * grid.length();
    let c = box_centre(grid);
    let outside: Vec<bool> =
        grid.map_points(|x| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > radius * radius);
    let top = m.max_abs();
    let off = m
        .values()
        .iter()
        .zip(&outside)
        .filter(|(_, &o)| o)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max);
    if off > tol * top {
        return Err(Error::Precondition(format!(
            "multiplier is not supported in radius {radius}: {off:e} outside vs sup {top:e}"
        )));
    }
    Ok(())
}

/// `‖m‖_{X^{1/2}_ζ → X^{-1/2}_ζ}` as the norm of
/// `B = W^{-1/2} m W^{-1/2}`, `W = |p_ζ| + τ`, by power iteration on `B*B`.
///
/// Returns a point once the Rayleigh quotient stagnates, otherwise the
/// interval `[√rayleigh, sup|m| / min W]`.
pub fn bilinear_norm(
    multiplier: &Multiplier,
    zeta: &PhaseVector,
    opts: &PowerOptions,
    stream: &Stream,
) -> Result<BilinearNorm> {
    let m = multiplier.field()?;
    let grid = m.grid().clone();
    check_support(&m, opts.support_fraction, opts.support_tol)?;
    let table = SymbolTable::new(&grid, zeta, 1.0)?;
    let tau = zeta.tau();
    let inv_root = table.weight_power(-0.5, false);
    let min_w = table
        .weight_power(1.0, false)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let padded = PaddedMultiplier::new(&m);
    let sup = padded.sup_norm();
    let mode = match multiplier {
        Multiplier::Scalar(_) => "m_f",
        Multiplier::Divergence(_) => "m_grad_f",
    };
    let report = EstimateReport::new("bilinear_norm", 1, 1)?.param("tau", tau);
    let extras = |r: EstimateReport, iterations: usize| {
        r.extra("sup_multiplier", sup)
            .extra("linfinity_bound", sup / tau)
            .extra("iterations", iterations as f64)
            .extra("divergence_mode", (mode == "m_grad_f") as u8 as f64)
    };
    if sup == 0.0 {
        return Ok(BilinearNorm {
            estimate: NormEstimate::Point(0.0),
            iterations: 0,
            report: extras(report, 0).finish(0.0, 0.0)?,
        });
    }
    let apply = |x: &SpectralField, conj: bool| -> Result<SpectralField> {
        let u = x.scale_by(&inv_root);
        let mu = if conj { padded.apply_conj(&u)? } else { padded.apply(&u)? };
        Ok(mu.scale_by(&inv_root))
    };
    let unit = |x: SpectralField| {
        let n = x.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (x.scale(Complex64::new(1.0 / n, 0.0)), n)
    };
    let (mut x, _) = unit(gaussian_spectrum(&grid, None, &mut stream.child("bilinear", &[tau]).rng(0)));
    let mut rayleigh = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=opts.max_iter {
        iterations = k;
        let y = apply(&x, false)?;
        let next = y.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>();
        let z = apply(&y, true)?;
        let (z, zn) = unit(z);
        let change = (next - rayleigh).abs();
        rayleigh = next;
        if zn == 0.0 || !zn.is_finite() {
            break;
        }
        x = z;
        if k > 1 && change <= opts.stagnation * rayleigh {
            converged = true;
            break;
        }
    }
    let estimate = if converged {
        NormEstimate::Point(rayleigh.sqrt())
    } else {
        NormEstimate::Interval {
            lo: rayleigh.sqrt(),
            hi: sup / min_w,
        }
    };
    let report = extras(report, iterations)
        .extra("lower", estimate.lower())
        .extra("ratio_to_linfinity", estimate.value() * tau / sup)
        .finish(estimate.value(), estimate.value() - estimate.lower())?;
    Ok(BilinearNorm {
        estimate,
        iterations,
        report,
    })
}

/// Cutoff multiplying the field in the localization estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffSpec {
    /// `φ ≡ 1`.
    Unit,
    /// `φ = 1` on the ball of `radius` about the box centre, smoothly
    /// decaying to 0 across `width`.
    Plateau { radius: f64, width: f64 },
}

impl CutoffSpec {
    pub fn field(&self, grid: &PeriodicGrid) -> Result<Field> {
        match *self {
            Self::Unit => Ok(Field::constant(grid, Complex64::new(1.0, 0.0))),
            Self::Plateau { radius, width } => {
                if !(radius > 0.0 && width > 0.0 && radius + width <= grid.length() / 2.0) {
                    return Err(Error::InvalidParameter {
                        name: "cutoff",
                        reason: format!("need 0 < radius, width and radius + width <= L/2, got {radius}, {width}"),
                    });
                }
                let c = box_centre(grid);
                Ok(Field::from_fn(grid, |x| {
                    let r = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    Complex64::new(smooth_step((radius + width - r) / width), 0.0)
                }))
            }
        }
    }
}

/// `(‖φu‖_{Ẋ^{-1/2}} / ‖u‖_{X^{-1/2}}, ‖φu‖_{X^{1/2}} / ‖u‖_{Ẋ^{1/2}})`.
/// With `matched`, the homogeneous weights are replaced by inhomogeneous
/// ones, so `φ ≡ 1` gives exactly 1 in both slots.
pub fn localization_ratios(
    phi: &PaddedMultiplier,
    u: &SpectralField,
    table: &SymbolTable,
    matched: bool,
) -> Result<(f64, f64)> {
    let phu = phi.apply(u)?;
    let hom = !matched;
    let dual_num = phu.weighted_l2(&table.weight_power(-0.5, hom));
    let dual_den = u.weighted_l2(&table.weight_power(-0.5, false));
    let loc_num = phu.weighted_l2(&table.weight_power(0.5, false));
    let loc_den = u.weighted_l2(&table.weight_power(0.5, hom));
    Ok((dual_num / dual_den, loc_num / loc_den))
}

/// Largest localization ratios over Gaussian fields. The constant is the
/// larger of the two directions.
pub fn verify_localization(
    phi: &CutoffSpec,
    grid: &PeriodicGrid,
    zeta: &PhaseVector,
    trials: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    let table = SymbolTable::new(grid, zeta, 1.0)?;
    let padded = PaddedMultiplier::new(&phi.field(grid)?);
    let matched = matches!(phi, CutoffSpec::Unit);
    let (radius, width) = match *phi {
        CutoffSpec::Unit => (f64::INFINITY, 0.0),
        CutoffSpec::Plateau { radius, width } => (radius, width),
    };
    let report = EstimateReport::new("localization", trials, 1)?
        .param("tau", zeta.tau())
        .param("radius", radius)
        .param("width", width);
    let stream = stream.child("localization", &[zeta.tau()]);
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let u = gaussian_spectrum(grid, None, &mut stream.rng(i));
            localization_ratios(&padded, &u, &table, matched)
        })
        .collect::<Result<_>>()?;
    let dual = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let loc = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let (_, spread) = mean_std(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    report
        .extra("dual", dual)
        .extra("loc", loc)
        .finish(dual.max(loc), spread)
}

/// Equivalence constants between `X^b_ζ` and `X^b_ζ̃` for `b = ±1/2`.
///
/// The exact constant is the lattice supremum of the weight ratio; the
/// Monte-Carlo ratios over Gaussian fields are reported alongside, with the
/// ceiling `4(1 + |ζ − ζ̃|)^{1/2}`.
pub fn verify_zeta_stability(
    zeta: &PhaseVector,
    zeta_tilde: &PhaseVector,
    grid: &PeriodicGrid,
    trials: usize,
    stream: &Stream,
) -> Result<EstimateReport> {
    for z in [zeta, zeta_tilde] {
        let defect = z.null_defect();
        if defect > 1e-12 * z.tau() * z.tau() {
            return Err(Error::NotNull(defect));
        }
    }
    let a = SymbolTable::new(grid, zeta, 1.0)?;
    let b = SymbolTable::new(grid, zeta_tilde, 1.0)?;
    let wa = a.weight_power(1.0, false);
    let wb = b.weight_power(1.0, false);
    let sup_ratio = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p / q).fold(0.0, f64::max);
    // (W/W̃)^{1/2} bounds b = 1/2 forward, (W̃/W)^{1/2} bounds b = −1/2 forward.
    let up = sup_ratio(&wa, &wb).sqrt();
    let down = sup_ratio(&wb, &wa).sqrt();
    let forward = up.max(down);
    let backward = down.max(up);

    let stream = stream.child("zeta_stability", &[zeta.tau(), zeta_tilde.tau()]);
    let mc: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let u = gaussian_spectrum(grid, None, &mut stream.rng(i));
            let mut f = 0.0f64;
            let mut r = 0.0f64;
            for e in [0.5, -0.5] {
                let na = u.weighted_l2(&a.weight_power(e, false));
                let nb = u.weighted_l2(&b.weight_power(e, false));
                f = f.max(na / nb);
                r = r.max(nb / na);
            }
            (f, r)
        })
        .collect();
    let distance = zeta.distance(zeta_tilde);
    let report = EstimateReport::new("zeta_stability", trials, 1)?
        .param("tau", zeta.tau())
        .param("distance", distance);
    report
        .extra("forward", forward)
        .extra("backward", backward)
        .extra("mc_forward", mc.iter().map(|p| p.0).fold(0.0, f64::max))
        .extra("mc_backward", mc.iter().map(|p| p.1).fold(0.0, f64::max))
        .extra("bound", 4.0 * (1.0 + distance).sqrt())
        .finish(forward.max(backward), (forward - backward).abs())
}
