//! The recovery experiment: synthetic conductivities, tilted phase pairs
//! `ζ̃₁ + ζ̃₂ = ik`, selection of `(τ, U)` by the smallness functional, and
//! reading `q̂` off the pairing `∫q e^{ik·x}(1+ψ₁)(1+ψ₂)`.
//!
//! Fourier convention: `qhat(k) := vol⁻¹∫q e^{ik·x} dx`, which is the grid
//! transform coefficient at `−k`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cgo::{
    box_centre, gaussian, pairing_spectral, solve_cgo, CgoOptions, CgoSolution, Conductivity,
};
use crate::error::{Error, Result};
use crate::phase::{lp_projection, DyadicIndex, PhaseVector, SymbolTable};
use crate::spaces::{besov_sp_norm, x_norm_with};
use crate::spectral::{
    dealiased_product_spectral, forward_transform, gradient, inverse_transform, lp_norm, Field,
    PeriodicGrid, SpectralField,
};
use crate::stats::{
    bilinear_norm, dyadic_random_series, haar_at, log_log_slope, CutoffSpec, Multiplier,
    OrthogonalSample, PowerOptions, Stream,
};

/// Largest admissible bump amplitude.
pub const MAX_BUMP_AMPLITUDE: f64 = 0.3;

/// A conductivity whose minimum is at or below this is rejected.
pub const MIN_GAMMA: f64 = 0.2;

/// Default Gaussian bump width; narrower bumps under-resolve at `N = 64`.
pub const DEFAULT_BUMP_WIDTH: f64 = 0.45;

/// Relative jitter applied to nominal `τ` so that lattice points do not sit
/// exactly on the characteristic set.
pub const TAU_JITTER: f64 = std::f64::consts::SQRT_2 * 1e-6;

/// `v = k/2` and `w` are rounded to multiples of `2^-QUANT_BITS`.
const QUANT_BITS: i32 = 42;

/// Largest `τ` for which the quantized parts stay exactly representable.
pub const MAX_PAIR_TAU: f64 = 1024.0;

/// `τ(1 + TAU_JITTER)`.
pub fn effective_tau(tau: f64) -> f64 {
    tau * (1.0 + TAU_JITTER)
}

/// One Gaussian bump `a·exp(−|x − c − offset|²/w²)` around the box centre `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub offset: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

impl Bump {
    pub fn centred(dim: usize, amplitude: f64) -> Self {
        Self {
            offset: vec![0.0; dim],
            amplitude,
            width: DEFAULT_BUMP_WIDTH,
        }
    }
}

/// Synthetic conductivity recipes.
#[derive(Debug, Clone, PartialEq)]
pub enum ConductivitySpec {
    Uniform,
    /// `γ = 1 + Σ bumps`.
    Bumps(Vec<Bump>),
    /// `log γ` a random dyadic series with `‖P_λ log γ‖_p ∝ λ^{-s}`, cut off
    /// inside radius `L/4` and scaled so `max|log γ| = amplitude`.
    Rough { s: f64, p: f64, amplitude: f64 },
}

/// A conductivity together with what was measured while building it.
#[derive(Debug, Clone)]
pub struct BuiltConductivity {
    pub conductivity: Conductivity,
    /// `‖P_λ log γ‖_p` per band (rough mode only).
    pub profile: Vec<(DyadicIndex, f64)>,
    /// Fitted exponent of the profile over the interior bands.
    pub profile_slope: Option<f64>,
    /// Dyadic `W^{s,p}` surrogate norm of `log γ`.
    pub besov_norm: Option<f64>,
}

fn check_min(gamma: &Field) -> Result<()> {
    let (min, max) = gamma
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)));
    if min <= MIN_GAMMA {
        return Err(Error::Ellipticity { min, max });
    }
    Ok(())
}

/// Interior bands used for the rough profile fit: `2 ≤ λ ≤ N/4` cells.
fn fit_bands(grid: &PeriodicGrid) -> impl Fn(DyadicIndex) -> bool {
    let top = (grid.size() / 4) as u64;
    move |l| l.value() >= 2 && l.value() <= top
}

pub fn make_conductivity(
    grid: &PeriodicGrid,
    spec: &ConductivitySpec,
    stream: &Stream,
) -> Result<BuiltConductivity> {
    let radius = grid.length() / 4.0;
    let plain = |conductivity| BuiltConductivity {
        conductivity,
        profile: Vec::new(),
        profile_slope: None,
        besov_norm: None,
    };
    match spec {
        ConductivitySpec::Uniform => Ok(plain(Conductivity::uniform(grid))),
        ConductivitySpec::Bumps(bumps) => {
            let centre = box_centre(grid);
            let mut gamma = Field::constant(grid, Complex64::new(1.0, 0.0));
            for b in bumps {
                if b.offset.len() != grid.dim() {
                    return Err(Error::InvalidParameter {
                        name: "offset",
                        reason: format!("expected {} components, got {}", grid.dim(), b.offset.len()),
                    });
                }
                if !(b.amplitude.abs() <= MAX_BUMP_AMPLITUDE) {
                    return Err(Error::InvalidParameter {
                        name: "amplitude",
                        reason: format!("|amplitude| must be at most {MAX_BUMP_AMPLITUDE}, got {}", b.amplitude),
                    });
                }
                if !(b.width > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "width",
                        reason: format!("must be positive, got {}", b.width),
                    });
                }
                let c: Vec<f64> = centre.iter().zip(&b.offset).map(|(a, o)| a + o).collect();
                gamma = gamma.add(&gaussian(grid, &c, b.amplitude, b.width))?;
            }
            check_min(&gamma)?;
            Ok(plain(Conductivity::new(gamma, radius)?))
        }
        &ConductivitySpec::Rough { s, p, amplitude } => {
            if !(amplitude > 0.0 && amplitude.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "amplitude",
                    reason: format!("must be positive, got {amplitude}"),
                });
            }
            let mut rng = stream.child("rough_conductivity", &[s, p, amplitude]).rng(0);
            let (series, _) = dyadic_random_series(grid, s, p, 1.0, &mut rng)?;
            let phi = CutoffSpec::Plateau {
                radius: radius / 2.0,
                width: radius / 2.0,
            }
            .field(grid)?;
            let raw = series.zip_map(&phi, |a, b| Complex64::new(a.re * b.re, 0.0))?;
            let peak = raw.max_abs();
            if peak == 0.0 {
                return Ok(plain(Conductivity::uniform(grid)));
            }
            let log = raw.scale(Complex64::new(amplitude / peak, 0.0));
            let gamma = log.map(|v| Complex64::new(v.re.exp(), 0.0));
            check_min(&gamma)?;
            let lh = forward_transform(&log);
            let keep = fit_bands(grid);
            let profile = crate::spaces::active_bands(grid)
                .into_iter()
                .filter(|l| l.as_f64() <= grid.nyquist() / grid.cell())
                .map(|l| Ok((l, lp_norm(&inverse_transform(&lp_projection(&lh, l)), p)?)))
                .collect::<Result<Vec<_>>>()?;
            let (x, y): (Vec<f64>, Vec<f64>) = profile
                .iter()
                .filter(|(l, v)| keep(*l) && *v > 0.0)
                .map(|(l, v)| (l.as_f64(), *v))
                .unzip();
            let profile_slope = (x.len() >= 2).then(|| log_log_slope(&x, &y));
            Ok(BuiltConductivity {
                conductivity: Conductivity::new(gamma, radius)?,
                profile,
                profile_slope,
                besov_norm: Some(besov_sp_norm(&log, s, p)?),
            })
        }
    }
}

fn quantize(v: f64) -> f64 {
    let scale = 2f64.powi(QUANT_BITS);
    (v * scale).round() / scale
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    (n > 1e-6).then(|| v.into_iter().map(|x| x / n).collect())
}

fn reject(v: &[f64], along: &[f64]) -> Vec<f64> {
    let c = dot(v, along);
    v.iter().zip(along).map(|(a, b)| a - c * b).collect()
}

/// The straight pair `ζ₂ = −ζ₁ = −τU(e₁ − ie₂)` and the tilted pair
/// `ζ̃₁ = τUe₁ + i(rUe₃ − √(τ²−r²)Ue₂)`, `ζ̃₂ = −τUe₁ + i(rUe₃ + √(τ²−r²)Ue₂)`
/// with `ζ̃₁ + ζ̃₂ = ik`, `k = 2rUe₃` on the lattice.
#[derive(Debug, Clone)]
pub struct ZetaPair {
    pub tau: f64,
    /// `|k|/2` after snapping.
    pub r: f64,
    pub requested_r: f64,
    pub u: OrthogonalSample,
    /// Snapped orthonormal frame `Ue₁, Ue₂, Ue₃`.
    pub frame: [Vec<f64>; 3],
    pub zeta1: PhaseVector,
    pub zeta2: PhaseVector,
    pub zt1: PhaseVector,
    pub zt2: PhaseVector,
    /// Physical frequency, stored as `2v` so the sum identity is exact.
    pub k: Vec<f64>,
    pub k_index: Vec<i64>,
    /// `|2r_requested·Ue₃ − k|`.
    pub snap_distance: f64,
}

impl ZetaPair {
    /// `max_i |ζ_i − ζ̃_i|`.
    pub fn tilt(&self) -> f64 {
        self.zeta1.distance(&self.zt1).max(self.zeta2.distance(&self.zt2))
    }

    /// Largest component of `ζ̃₁ + ζ̃₂ − ik`; zero by construction.
    pub fn sum_defect(&self) -> f64 {
        let re = self.zt1.re().iter().zip(self.zt2.re()).map(|(a, b)| (a + b).abs());
        let im = self
            .zt1
            .im()
            .iter()
            .zip(self.zt2.im())
            .zip(&self.k)
            .map(|((a, b), k)| (a + b - k).abs());
        re.chain(im).fold(0.0, f64::max)
    }
}

pub fn make_zeta_pair(grid: &PeriodicGrid, tau: f64, r: f64, u: &OrthogonalSample) -> Result<ZetaPair> {
    let n = grid.dim();
    if u.dim() != n || n < 3 {
        return Err(Error::InvalidParameter {
            name: "U",
            reason: format!("need an orthogonal matrix of the grid dimension >= 3, got {}", u.dim()),
        });
    }
    if !(r > 0.0 && tau > r && tau <= MAX_PAIR_TAU) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("need 0 < r < tau <= {MAX_PAIR_TAU}, got tau = {tau}, r = {r}"),
        });
    }
    let d0 = grid.cell();
    let raw: Vec<f64> = u.column(2).iter().map(|v| 2.0 * r * v).collect();
    let k_index: Vec<i64> = raw.iter().map(|v| (v / d0).round() as i64).collect();
    if k_index.iter().all(|&k| k == 0) || grid.flat_index(&k_index).is_none() {
        return Err(Error::OffLattice(raw));
    }
    let snapped: Vec<f64> = k_index.iter().map(|&k| k as f64 * d0).collect();
    let snap_distance = raw
        .iter()
        .zip(&snapped)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let r_snapped = dot(&snapped, &snapped).sqrt() / 2.0;
    if !(tau > r_snapped) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("snapped r = {r_snapped} is not below tau = {tau}"),
        });
    }
    let e3: Vec<f64> = snapped.iter().map(|v| v / (2.0 * r_snapped)).collect();
    let degenerate = || Error::Precondition("frame degenerates after snapping k".into());
    let e1 = unit(reject(&u.column(0), &e3)).ok_or_else(degenerate)?;
    let e2 = unit(reject(&reject(&u.column(1), &e3), &e1)).ok_or_else(degenerate)?;

    let v: Vec<f64> = snapped.iter().map(|x| quantize(x / 2.0)).collect();
    let height = (tau * tau - r_snapped * r_snapped).sqrt();
    let w: Vec<f64> = e2.iter().map(|x| quantize(height * x)).collect();
    let re1: Vec<f64> = e1.iter().map(|x| tau * x).collect();
    let re2: Vec<f64> = re1.iter().map(|x| -x).collect();
    let im1: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    let im2: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
    let zt1 = PhaseVector::from_parts(re1, im1)?;
    let zt2 = PhaseVector::from_parts(re2, im2)?;
    let zeta1 = PhaseVector::new(tau, e1.clone(), e2.clone())?;
    let zeta2 = zeta1.negated();
    Ok(ZetaPair {
        tau,
        r: r_snapped,
        requested_r: r,
        u: u.clone(),
        frame: [e1, e2, e3],
        zeta1,
        zeta2,
        zt1,
        zt2,
        k: v.iter().map(|x| 2.0 * x).collect(),
        k_index,
        snap_distance,
    })
}

/// Controls for [`select_parameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    /// Exponent on the multiplier norms in the smallness functional.
    pub exponent: f64,
    pub power: PowerOptions,
    /// Rejection sampling gives up after `samples · attempts_per_sample` draws.
    pub attempts_per_sample: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            exponent: 3.0,
            power: PowerOptions::default(),
            attempts_per_sample: 20_000,
        }
    }
}

/// One evaluated `(τ, U)`.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub tau: f64,
    pub u: OrthogonalSample,
    pub value: f64,
    pub multiplier_norms: [f64; 2],
    /// `Σ_j ‖q_i‖²_{X^{-1/2}_{ζ_j}}` for `i = 1, 2`.
    pub potential_terms: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub tau: f64,
    pub u: OrthogonalSample,
    /// The smallness functional at the minimizer.
    pub delta: f64,
    pub candidates: Vec<Candidate>,
    pub attempts: usize,
}

/// `F(τ,U) = Σ_i ‖m_{q_i}‖^p_{X^{1/2}_{ζ_i} → X^{-1/2}_{ζ_i}} + Σ_{i,j} ‖q_i‖²_{X^{-1/2}_{ζ_j}}`
/// for the straight pair `ζ₁ = τU(e₁ − ie₂)`, `ζ₂ = −ζ₁`.
pub fn smallness_functional(
    q1: &Field,
    q2: &Field,
    tau: f64,
    u: &OrthogonalSample,
    opts: &SelectionOptions,
    stream: &Stream,
) -> Result<Candidate> {
    q1.grid().check_same(q2.grid())?;
    let zeta1 = PhaseVector::new(tau, u.column(0), u.column(1))?;
    let zetas = [zeta1.clone(), zeta1.negated()];
    let qs = [q1, q2];
    let mut multiplier_norms = [0.0; 2];
    let mut potential_terms = [0.0; 2];
    for i in 0..2 {
        let b = bilinear_norm(&Multiplier::Scalar(qs[i].clone()), &zetas[i], &opts.power, stream)?;
        multiplier_norms[i] = b.estimate.value();
        let qh = forward_transform(qs[i]);
        for z in &zetas {
            let table = SymbolTable::new(qs[i].grid(), z, 1.0)?;
            potential_terms[i] += x_norm_with(&qh, &table, -0.5, false)?.powi(2);
        }
    }
    let value = multiplier_norms.iter().map(|m| m.powf(opts.exponent)).sum::<f64>()
        + potential_terms.iter().sum::<f64>();
    Ok(Candidate {
        tau,
        u: u.clone(),
        value,
        multiplier_norms,
        potential_terms,
    })
}

/// Evaluates the functional on every candidate (in parallel) and keeps the
/// minimizer; ties go to the earlier candidate.
pub fn select_from_candidates(
    q1: &Field,
    q2: &Field,
    pool: &[(f64, OrthogonalSample)],
    opts: &SelectionOptions,
    stream: &Stream,
) -> Result<Selection> {
    if pool.is_empty() {
        return Err(Error::Precondition("empty candidate pool".into()));
    }
    let candidates = pool
        .par_iter()
        .enumerate()
        .map(|(i, (tau, u))| {
            smallness_functional(q1, q2, *tau, u, opts, &stream.child("candidate", &[i as f64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = candidates
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.value < candidates[b].value { i } else { b });
    Ok(Selection {
        tau: candidates[best].tau,
        u: candidates[best].u.clone(),
        delta: candidates[best].value,
        candidates,
        attempts: pool.len(),
    })
}

/// Draws `τ ~ U[M, 2M]` and Haar `U` restricted to `‖U − I‖ < ε` by
/// rejection, then minimizes the smallness functional over the accepted
/// draws.
pub fn select_parameters(
    q1: &Field,
    q2: &Field,
    m: f64,
    eps_ball: f64,
    samples: usize,
    opts: &SelectionOptions,
    stream: &Stream,
) -> Result<Selection> {
    let grid = q1.grid();
    if samples < 8 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 8, got {samples}"),
        });
    }
    if !(m > 0.0 && eps_ball > 0.0) {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("M and eps must be positive, got {m}, {eps_ball}"),
        });
    }
    if 2.0 * m > grid.nyquist() {
        return Err(Error::Nyquist {
            what: "2M",
            value: 2.0 * m,
            limit: grid.nyquist(),
        });
    }
    let draws = stream.child("select", &[m, eps_ball]);
    let taus = draws.child("tau", &[]);
    let limit = samples * opts.attempts_per_sample;
    let mut pool = Vec::with_capacity(samples);
    let mut closest = f64::INFINITY;
    let mut attempts = 0;
    while pool.len() < samples && attempts < limit {
        let index = attempts as u64;
        attempts += 1;
        let u = haar_at(grid.dim(), &draws, index)?;
        let d = u.distance_to_identity();
        closest = closest.min(d);
        if d < eps_ball {
            let t: f64 = rand::Rng::random(&mut taus.rng(index));
            pool.push((m * (1.0 + t), u));
        }
    }
    if pool.is_empty() {
        return Err(Error::AllRejected {
            attempts,
            eps: eps_ball,
            suggestion: closest,
        });
    }
    let mut sel = select_from_candidates(q1, q2, &pool, opts, &draws)?;
    sel.attempts = attempts;
    Ok(sel)
}

/// Outcome of reading `q̂(k)` off the CGO pairing.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub k: Vec<f64>,
    pub k_index: Vec<i64>,
    pub tau: f64,
    pub u: OrthogonalSample,
    pub qhat_est: Complex64,
    pub qhat_true: Complex64,
    /// `vol⁻¹∫q e^{ik·x}(ψ₁ + ψ₂)`.
    pub linear: Complex64,
    /// `vol⁻¹∫q e^{ik·x}ψ₁ψ₂`.
    pub bilinear: Complex64,
    /// `Σ_j ‖q‖_{Ẋ^{-1/2}_{ζ̃_j}}`.
    pub delta: f64,
    pub psi_norms: [f64; 2],
    pub max_ratio: f64,
    pub snap_distance: f64,
}

impl RecoveryResult {
    pub fn error(&self) -> f64 {
        (self.qhat_est - self.qhat_true).norm()
    }

    /// `|qhat_est − qhat_true − linear − bilinear|`.
    pub fn bookkeeping_defect(&self) -> f64 {
        (self.qhat_est - self.qhat_true - self.linear - self.bilinear).norm()
    }
}

/// Solves both CGO problems for `q` on the tilted pair and pairs them.
pub fn solve_pair(q1: &Field, q2: &Field, pair: &ZetaPair, opts: &CgoOptions) -> Result<[CgoSolution; 2]> {
    let (a, b) = rayon::join(|| solve_cgo(q1, &pair.zt1, opts), || solve_cgo(q2, &pair.zt2, opts));
    Ok([a?, b?])
}

pub fn recover_fourier(
    q: &Field,
    tau: f64,
    r: f64,
    u: &OrthogonalSample,
    opts: &CgoOptions,
) -> Result<RecoveryResult> {
    let grid = q.grid();
    let pair = make_zeta_pair(grid, tau, r, u)?;
    let [s1, s2] = solve_pair(q, q, &pair, opts)?;
    let vol = grid.volume();
    let qh = forward_transform(q);
    let one = SpectralField::mode(grid, &vec![0; grid.dim()], Complex64::new(1.0, 0.0))?;
    let sum = s1.psi_hat.add(&s2.psi_hat)?;
    let prod = dealiased_product_spectral(&s1.psi_hat, &s2.psi_hat)?;
    let full = one.add(&sum)?.add(&prod)?;
    let k = &pair.k_index;
    let est = pairing_spectral(&qh, k, &full)? / vol;
    let minus_k: Vec<i64> = k.iter().map(|v| -v).collect();
    let truth = qh.coefficient(&minus_k).ok_or_else(|| Error::OffLattice(pair.k.clone()))?;
    Ok(RecoveryResult {
        k: pair.k.clone(),
        k_index: k.clone(),
        tau,
        u: u.clone(),
        qhat_est: est,
        qhat_true: truth,
        linear: pairing_spectral(&qh, k, &sum)? / vol,
        bilinear: pairing_spectral(&qh, k, &prod)? / vol,
        delta: s1.q_norm + s2.q_norm,
        psi_norms: [s1.psi_norm, s2.psi_norm],
        max_ratio: s1.max_ratio().max(s2.max_ratio()),
        snap_distance: pair.snap_distance,
    })
}

/// `∫(q₁ − q₂) e^{ik·x}(1+ψ₁)(1+ψ₂) dx`, `ψ_i` solved for `(q_i, ζ̃_i)`.
pub fn alessandrini_gap(q1: &Field, q2: &Field, pair: &ZetaPair, psi1: &Field, psi2: &Field) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let a = dealiased_product_spectral(
        &forward_transform(&psi1.map(|v| one + v)),
        &forward_transform(&psi2.map(|v| one + v)),
    )?;
    pairing_spectral(&forward_transform(&q1.sub(q2)?), &pair.k_index, &a)
}

/// Both sides of `∫(g₂∇g₁ − g₁∇g₂)·∇(log g₁ − log g₂) = ∫g₁g₂|∇(log g₁ − log g₂)|²`,
/// `g_i = √γ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub discrepancy: f64,
}

/// `∫ a b` for real fields, by Parseval on the dealiased product.
fn integral_of_product(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    let p = dealiased_product_spectral(a, b)?;
    let zero = vec![0; a.grid().dim()];
    Ok(p.coefficient(&zero).unwrap_or_default().re * a.grid().volume())
}

pub fn gradient_identity_check(gamma1: &Conductivity, gamma2: &Conductivity) -> Result<GradientIdentity> {
    gamma1.grid().check_same(gamma2.grid())?;
    let root = |g: &Conductivity| g.gamma().map(|v| Complex64::new(v.re.sqrt(), 0.0));
    let (g1, g2) = (root(gamma1), root(gamma2));
    let diff_log = g1.zip_map(&g2, |a, b| Complex64::new(a.re.ln() - b.re.ln(), 0.0))?;
    let dl: Vec<SpectralField> = gradient(&diff_log).iter().map(forward_transform).collect();
    let (d1, d2) = (gradient(&g1), gradient(&g2));
    let (g1h, g2h) = (forward_transform(&g1), forward_transform(&g2));
    let g12 = dealiased_product_spectral(&g1h, &g2h)?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..dl.len() {
        let flux = dealiased_product_spectral(&g2h, &forward_transform(&d1[i]))?
            .sub(&dealiased_product_spectral(&g1h, &forward_transform(&d2[i]))?)?;
        lhs += integral_of_product(&flux, &dl[i])?;
        rhs += integral_of_product(&dealiased_product_spectral(&g12, &dl[i])?, &dl[i])?;
    }
    let scale = lhs.abs().max(rhs.abs());
    let discrepancy = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    Ok(GradientIdentity { lhs, rhs, discrepancy })
}
