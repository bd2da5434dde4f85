//! Monodromy spectra, limit cycles, contraction and entropy checks, and the
//! relaxing certificate for non-periodic schedules.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{min_rate_over_window, rate_sample_with_side, Protocol};
use crate::operator::basis::OperatorBasis;
use crate::operator::eigen::eigvals_real;
use crate::operator::entropy::relative_entropy;
use crate::operator::superop::SuperOp;
use crate::operator::{subspace_inf_norm, trace_norm, DensityMatrix, Domain, HermitianOp};
use crate::par;
use crate::propagation::{
    monodromy_with, propagate_interval_with, PeriodSampler, PropagationOptions,
};

/// `|μ − 1|` below this counts as a unit eigenvalue.
pub const UNIT_EIGENVALUE_TOLERANCE: f64 = 1e-6;
/// `|μ| > 1 − this` counts as peripheral.
pub const PERIPHERAL_TOLERANCE: f64 = 1e-6;
/// Largest root-of-unity order tried when classifying peripheral eigenvalues.
pub const MAX_ROOT_ORDER: u32 = 12;
/// Power iteration stops once successive iterates differ by this in trace norm.
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-12;
pub const POWER_ITERATION_CAP: usize = 1_000_000;
/// Linear-solve and power-iteration anchors must agree to this.
pub const DUAL_METHOD_TOLERANCE: f64 = 1e-8;
/// Negative eigenvalues of the computed anchor down to this are clipped.
pub const ANCHOR_POSITIVITY_TOLERANCE: f64 = 1e-9;
pub const CONTRACTION_SLACK: f64 = 1e-9;
pub const ENTROPY_SLACK: f64 = 1e-9;
/// States with an eigenvalue below this are mixed with `ENTROPY_REGULARIZATION · 𝟙/d`.
pub const ENTROPY_EIGENVALUE_FLOOR: f64 = 1e-12;
pub const ENTROPY_REGULARIZATION: f64 = 1e-12;
/// Per-period integral of `λ_t` above this makes `∫λ dt` diverge.
pub const PERIODIC_DIVERGENCE_THRESHOLD: f64 = 1e-12;
/// Minimum tail average of `λ_t` for a one-shot schedule to count as divergent.
pub const TAIL_AVERAGE_THRESHOLD: f64 = 1e-9;
/// Minimum growth of `∫λ dt` over the second half of the horizon, relative
/// to the first half, for a one-shot schedule to count as divergent.
pub const TAIL_GROWTH_FRACTION: f64 = 0.1;
/// Distances below this are treated as converged when fitting decay ratios.
pub const DISTANCE_NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    UniqueCycle,
    Degenerate,
    PeriodMultiple(u32),
    Undetermined,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniqueCycle => write!(f, "UNIQUE_CYCLE"),
            Self::Degenerate => write!(f, "DEGENERATE"),
            Self::PeriodMultiple(n) => write!(f, "PERIOD_MULTIPLE({n})"),
            Self::Undetermined => write!(f, "UNDETERMINED"),
        }
    }
}

/// Spectrum of the monodromy map, sorted by decreasing modulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub unit_eigenvalue_count: usize,
    pub peripheral_count: usize,
    pub second_modulus: f64,
    pub gap: f64,
    pub classification: Classification,
}

impl SpectralReport {
    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.first().map_or(0.0, |z| z.norm())
    }
}

/// Smallest `n ≤ MAX_ROOT_ORDER` with `μ` within `tol` of an `n`-th root of unity.
fn root_order(mu: Complex64, tol: f64) -> Option<u32> {
    (1..=MAX_ROOT_ORDER).find(|&n| {
        (0..n).any(|k| {
            let root = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            (mu - root).norm() < tol
        })
    })
}

fn lcm(a: u32, b: u32) -> u32 {
    fn gcd(a: u32, b: u32) -> u32 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Spectral report of an arbitrary full-space map.
///
/// Classification order: a peripheral eigenvalue at a nontrivial root of
/// unity gives `PERIOD_MULTIPLE(n)` with `n` the least common order of all
/// peripheral eigenvalues (if `n ≤ 12`); otherwise two or more unit
/// eigenvalues give `DEGENERATE`; otherwise a single peripheral eigenvalue
/// gives `UNIQUE_CYCLE`; anything else is `UNDETERMINED`.
pub fn spectrum_of(map: &SuperOp) -> Result<SpectralReport> {
    spectrum_with(map, &SpectralTolerances::default())
}

/// Thresholds used to count unit and peripheral eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTolerances {
    /// `|μ − 1|` (or distance to a root of unity) below this counts as a match.
    pub unit: f64,
    /// `|μ| > 1 − peripheral` counts as peripheral.
    pub peripheral: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        Self { unit: UNIT_EIGENVALUE_TOLERANCE, peripheral: PERIPHERAL_TOLERANCE }
    }
}

/// [`spectrum_of`] with explicit thresholds.
pub fn spectrum_with(map: &SuperOp, tol: &SpectralTolerances) -> Result<SpectralReport> {
    let mut eigenvalues = eigvals_real(map.matrix())?;
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    let unit_eigenvalue_count =
        eigenvalues.iter().filter(|z| (*z - Complex64::new(1.0, 0.0)).norm() < tol.unit).count();
    let peripheral: Vec<Complex64> =
        eigenvalues.iter().copied().filter(|z| z.norm() > 1.0 - tol.peripheral).collect();
    let second_modulus = eigenvalues.get(1).map_or(0.0, |z| z.norm());
    let orders: Vec<Option<u32>> = peripheral.iter().map(|&z| root_order(z, tol.unit)).collect();
    let has_nontrivial_root = orders.iter().any(|o| matches!(o, Some(n) if *n > 1));
    let common = orders.iter().try_fold(1u32, |acc, o| o.map(|n| lcm(acc, n)));

    let classification = match common {
        Some(n) if has_nontrivial_root && n <= MAX_ROOT_ORDER => Classification::PeriodMultiple(n),
        _ if unit_eigenvalue_count >= 2 => Classification::Degenerate,
        _ if peripheral.len() == 1 && unit_eigenvalue_count == 1 => Classification::UniqueCycle,
        _ => Classification::Undetermined,
    };
    if unit_eigenvalue_count == 0 {
        log::warn!("monodromy has no eigenvalue within {} of 1", tol.unit);
    }
    Ok(SpectralReport {
        eigenvalues,
        unit_eigenvalue_count,
        peripheral_count: peripheral.len(),
        second_modulus,
        gap: 1.0 - second_modulus,
        classification,
    })
}

/// Eigenvalues and classification of `V̂_{T,0}`.
pub fn monodromy_spectrum(protocol: &Protocol, opts: &PropagationOptions) -> Result<SpectralReport> {
    periodic_only(protocol)?;
    spectrum_of(monodromy_with(protocol, opts)?.superop())
}

fn periodic_only(protocol: &Protocol) -> Result<()> {
    if protocol.is_periodic() {
        Ok(())
    } else {
        Err(Error::Precondition("this analysis needs a periodic protocol".into()))
    }
}

/// Fixed point of a trace-preserving map from `(I − M′)x = traceless part of M(𝟙/d)`.
pub fn fixed_point_linear(map: &SuperOp) -> Result<HermitianOp> {
    let d = map.dim();
    let n = d * d;
    let basis = OperatorBasis::gell_mann(d)?;
    let m = map.matrix();
    let m_prime = m.view((1, 1), (n - 1, n - 1));
    // M(𝟙/d) has coordinate 1/√d on 𝟙/√d; its traceless part is column 0 below the corner
    let rhs: DVector<f64> = m.view((1, 0), (n - 1, 1)).column(0) / (d as f64).sqrt();
    let a = DMatrix::<f64>::identity(n - 1, n - 1) - m_prime;
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I − M′ is singular; the fixed space is degenerate".into()))?;
    let mut coords = DVector::zeros(n);
    coords[0] = 1.0 / (d as f64).sqrt();
    coords.rows_mut(1, n - 1).copy_from(&x);
    Ok(basis.reconstruct(&coords))
}

/// Limit of `M^k ρ_0`, stopping when successive iterates agree to `tolerance` in trace norm.
pub fn fixed_point_power(map: &SuperOp, start: &HermitianOp, tolerance: f64, cap: usize) -> Result<(HermitianOp, usize)> {
    let basis = OperatorBasis::gell_mann(map.dim())?;
    let mut v = basis.coords(start)?;
    for k in 1..=cap {
        let next = map.matrix() * &v;
        let diff = basis.reconstruct(&(&next - &v));
        v = next;
        // cheap screen before the eigendecomposition
        if diff.matrix().norm() <= tolerance && trace_norm(&diff)? <= tolerance {
            return Ok((basis.reconstruct(&v), k));
        }
    }
    Err(Error::NonConvergent { iterations: cap })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitCycle {
    /// `ρ^cy_0`
    pub anchor: DensityMatrix,
    /// `(t, ρ^cy_t)` over one period.
    pub samples: Vec<(f64, DensityMatrix)>,
    /// `‖ρ^cy_T − ρ^cy_0‖₁`
    pub periodicity_residual: f64,
    /// Anchor from power iteration.
    pub power_anchor: HermitianOp,
    pub power_iterations: usize,
    /// `‖linear-solve anchor − power-iteration anchor‖₁`
    pub dual_method_discrepancy: f64,
    pub spectrum: SpectralReport,
}

fn clip_anchor(x: &HermitianOp) -> Result<DensityMatrix> {
    DensityMatrix::clip(x, ANCHOR_POSITIVITY_TOLERANCE)
}

/// The unique limit cycle of a periodic protocol.
pub fn find_limit_cycle(
    protocol: &Protocol,
    opts: &PropagationOptions,
    points_per_period: usize,
) -> Result<LimitCycle> {
    periodic_only(protocol)?;
    let sampler = PeriodSampler::new(protocol, points_per_period.max(1), opts)?;
    let m = sampler.monodromy().superop();
    let spectrum = spectrum_of(m)?;
    if spectrum.unit_eigenvalue_count != 1 {
        return Err(Error::DegenerateFixedSpace { count: spectrum.unit_eigenvalue_count });
    }
    let linear = fixed_point_linear(m)?;
    let d = protocol.dim();
    let (power_anchor, power_iterations) = fixed_point_power(
        m,
        DensityMatrix::maximally_mixed(d).op(),
        POWER_ITERATION_TOLERANCE,
        POWER_ITERATION_CAP,
    )?;
    let dual_method_discrepancy = trace_norm(&(&linear - &power_anchor))?;
    if dual_method_discrepancy > DUAL_METHOD_TOLERANCE {
        log::warn!("limit-cycle anchors disagree by {dual_method_discrepancy:.3e}");
    }
    let anchor = clip_anchor(&linear)?;
    let traj = sampler.trajectory(anchor.op(), 1)?;
    let end = &traj.last().expect("trajectory has an endpoint").1;
    let periodicity_residual = trace_norm(&(end - anchor.op()))?;
    let samples = traj[..traj.len() - 1]
        .iter()
        .map(|(t, x)| clip_anchor(x).map(|s| (*t, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitCycle { anchor, samples, periodicity_residual, power_anchor, power_iterations, dual_method_discrepancy, spectrum })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `Λ` on `[0, τ]`.
    pub min_rate: f64,
    pub tau: f64,
    pub max_ratio: f64,
    /// `e^{−Λτ}`
    pub bound: f64,
    pub pass: bool,
    /// Whether every ratio is at most 1 (plus slack).
    pub non_expanding: bool,
}

/// Measures `‖(V̂†_{T,0} X′)′‖∞ / ‖X′‖∞` over random traceless `X′` and
/// compares the worst case with `e^{−Λτ}`.
///
/// `τ = 0` checks only that the full-period map does not expand the norm.
pub fn contraction_check(
    protocol: &Protocol,
    tau: f64,
    n_samples: usize,
    rate_samples: usize,
    opts: &PropagationOptions,
    seed: u64,
) -> Result<ContractionReport> {
    periodic_only(protocol)?;
    if !(tau >= 0.0) || tau > protocol.period() {
        return Err(Error::Precondition(format!("τ = {tau} must lie in [0, T]")));
    }
    let min_rate = if tau > 0.0 { min_rate_over_window(protocol, 0.0, tau, rate_samples)? } else { 0.0 };
    if tau > 0.0 && !(min_rate > 0.0) {
        return Err(Error::Precondition(format!(
            "window [0, {tau}] is not valid for the contraction bound: Λ = {min_rate}"
        )));
    }
    let adjoint = propagate_interval_with(protocol, 0.0, protocol.period(), opts, true)?;
    let d = protocol.dim();
    let basis = OperatorBasis::gell_mann(d)?;
    let ratios = par::try_map_range(n_samples, |i| -> Result<f64> {
        let mut rng = par::sample_rng(seed, i as u64);
        let x = HermitianOp::random_traceless(d, &mut rng);
        contraction_ratio(adjoint.superop(), &basis, &x)
    })?;
    let max_ratio = ratios.into_iter().fold(0.0, f64::max);
    let bound = (-min_rate * tau).exp();
    Ok(ContractionReport {
        min_rate,
        tau,
        max_ratio,
        bound,
        pass: max_ratio <= bound + CONTRACTION_SLACK,
        non_expanding: max_ratio <= 1.0 + CONTRACTION_SLACK,
    })
}

/// `‖(V̂ X′)′‖∞ / ‖X′‖∞` with the traceless ∞-norm, 0 for `X′ = 0`.
pub fn contraction_ratio(map: &SuperOp, basis: &OperatorBasis, x: &HermitianOp) -> Result<f64> {
    let x = x.traceless_part();
    let denom = subspace_inf_norm(&x, Domain::Traceless)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    let image = map.apply_with(basis, &x)?.traceless_part();
    Ok(subspace_inf_norm(&image, Domain::Traceless)? / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    /// `(t, S(ρ_t‖σ_t))`
    pub points: Vec<(f64, f64)>,
    /// Largest single-step increase.
    pub max_increase: f64,
    pub monotone: bool,
    /// Whether any state was mixed with `1e-12·𝟙/d` before taking logarithms.
    pub regularized: bool,
}

impl EntropyTrace {
    fn from_points(points: Vec<(f64, f64)>, regularized: bool) -> Self {
        let max_increase = points.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
        let max_increase = if points.len() < 2 { 0.0 } else { max_increase };
        Self { monotone: max_increase <= ENTROPY_SLACK, points, max_increase, regularized }
    }
}

fn regularize(x: &HermitianOp, flag: &mut bool) -> Result<DensityMatrix> {
    let rho = DensityMatrix::clip(x, 1e-8)?;
    let min = rho.op().eig()?.values[0];
    if min >= ENTROPY_EIGENVALUE_FLOOR {
        return Ok(rho);
    }
    *flag = true;
    let d = rho.dim();
    let mixed = &rho.op().scale(1.0 - ENTROPY_REGULARIZATION)
        + &HermitianOp::identity(d).scale(ENTROPY_REGULARIZATION / d as f64);
    DensityMatrix::clip(&mixed, 1e-8)
}

/// `S(ρ_t‖σ_t)` for two co-evolved states at `points_per_period` times per
/// period over `horizon_periods` periods.
pub fn entropy_monotonicity_trace(
    protocol: &Protocol,
    rho0: &DensityMatrix,
    sigma0: &DensityMatrix,
    horizon_periods: usize,
    points_per_period: usize,
    opts: &PropagationOptions,
) -> Result<EntropyTrace> {
    let sampler = PeriodSampler::new(protocol, points_per_period, opts)?;
    entropy_trace_with(&sampler, rho0, sigma0, horizon_periods)
}

pub fn entropy_trace_with(
    sampler: &PeriodSampler,
    rho0: &DensityMatrix,
    sigma0: &DensityMatrix,
    horizon_periods: usize,
) -> Result<EntropyTrace> {
    if relative_entropy(rho0, sigma0)?.is_infinite() {
        return Err(Error::InfiniteEntropy);
    }
    let a = sampler.trajectory(rho0.op(), horizon_periods)?;
    let b = sampler.trajectory(sigma0.op(), horizon_periods)?;
    paired_entropies(&a, &b)
}

/// `S(ρ_t‖σ_t)` at `points` equally spaced times on `[0, t_end]`; works for
/// one-shot schedules as well as periodic protocols.
pub fn entropy_trace_on_grid(
    protocol: &Protocol,
    rho0: &DensityMatrix,
    sigma0: &DensityMatrix,
    t_end: f64,
    points: usize,
    opts: &PropagationOptions,
) -> Result<EntropyTrace> {
    if relative_entropy(rho0, sigma0)?.is_infinite() {
        return Err(Error::InfiniteEntropy);
    }
    if points < 2 {
        return Err(Error::Precondition("need at least 2 time points".into()));
    }
    let times: Vec<f64> = (0..points).map(|k| t_end * k as f64 / (points - 1) as f64).collect();
    let (_, maps) = crate::propagation::propagate_with_snapshots(protocol, 0.0, t_end, &times, opts)?;
    let mut a = Vec::with_capacity(points);
    let mut b = Vec::with_capacity(points);
    for (t, m) in times.iter().zip(&maps) {
        a.push((*t, m.apply(rho0.op())?));
        b.push((*t, m.apply(sigma0.op())?));
    }
    paired_entropies(&a, &b)
}

fn paired_entropies(a: &[(f64, HermitianOp)], b: &[(f64, HermitianOp)]) -> Result<EntropyTrace> {
    let mut regularized = false;
    let mut points = Vec::with_capacity(a.len());
    for ((t, x), (_, y)) in a.iter().zip(b) {
        let r = regularize(x, &mut regularized)?;
        let s = regularize(y, &mut regularized)?;
        points.push((*t, relative_entropy(&r, &s)?));
    }
    Ok(EntropyTrace::from_points(points, regularized))
}

/// `S(ρ_{kT}‖ρ_{(k+1)T})` for `k = 0..periods`.
pub fn lag_period_entropy(monodromy: &SuperOp, rho0: &DensityMatrix, periods: usize) -> Result<EntropyTrace> {
    let states = crate::propagation::stroboscopic(monodromy, rho0.op(), periods + 1)?;
    let mut regularized = false;
    let mut points = Vec::with_capacity(periods);
    for k in 0..periods {
        let r = regularize(&states[k], &mut regularized)?;
        let s = regularize(&states[k + 1], &mut regularized)?;
        points.push((k as f64, relative_entropy(&r, &s)?));
    }
    Ok(EntropyTrace::from_points(points, regularized))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntegralVerdict {
    Divergent,
    FiniteSoFar,
}

/// Interval on which every sampled generator has a self-adjoint, irreducible
/// span, with the smallest sampled decay rate on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisWindow {
    pub start: f64,
    pub end: f64,
    pub min_rate: f64,
}

impl HypothesisWindow {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Maximal windows inside `[0, period]` where the span conditions hold.
///
/// Constant segments are decided by one evaluation and contribute their
/// exact bounds; modulated segments are sampled on `samples_per_segment`
/// points, so their window ends are accurate to the grid spacing. Windows
/// that touch across a segment boundary are merged.
pub fn hypothesis_windows(protocol: &Protocol, samples_per_segment: usize) -> Result<Vec<HypothesisWindow>> {
    use crate::lindblad::Side;
    if samples_per_segment < 2 {
        return Err(Error::Precondition("need at least 2 samples per segment".into()));
    }
    let basis = OperatorBasis::gell_mann(protocol.dim())?;
    let mut windows: Vec<HypothesisWindow> = Vec::new();
    let mut push = |w: HypothesisWindow| match windows.last_mut() {
        Some(last) if (last.end - w.start).abs() <= 1e-12 * protocol.period().max(1.0) => {
            last.end = w.end;
            last.min_rate = last.min_rate.min(w.min_rate);
        }
        _ => windows.push(w),
    };
    for (i, seg) in protocol.segments().iter().enumerate() {
        let (a, b) = protocol.segment_bounds(i);
        if seg.is_constant() {
            let s = rate_sample_with_side(protocol, &basis, 0.5 * (a + b), Side::Right)?;
            if s.spohn_conditions() && s.lambda > 0.0 {
                push(HypothesisWindow { start: a, end: b, min_rate: s.lambda });
            }
            continue;
        }
        let n = samples_per_segment;
        let step = (b - a) / (n - 1) as f64;
        let samples = par::try_map_range(n, |k| {
            let (t, side) = if k == n - 1 { (b, Side::Left) } else { (a + step * k as f64, Side::Right) };
            rate_sample_with_side(protocol, &basis, t, side)
        })?;
        let mut run: Option<HypothesisWindow> = None;
        for s in &samples {
            if s.spohn_conditions() && s.lambda > 0.0 {
                let w = run.get_or_insert(HypothesisWindow { start: s.t, end: s.t, min_rate: s.lambda });
                w.end = s.t;
                w.min_rate = w.min_rate.min(s.lambda);
            } else if let Some(w) = run.take() {
                if w.length() > 0.0 {
                    push(w);
                }
            }
        }
        if let Some(w) = run.filter(|w| w.length() > 0.0) {
            push(w);
        }
    }
    Ok(windows)
}

/// Evidence for `∫₀^∞ λ_t dt = ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    /// `(t, λ_t)`
    pub lambda_profile: Vec<(f64, f64)>,
    /// Trapezoid estimate of `∫₀^H λ_t dt`.
    pub integral: f64,
    /// Per-period integral (periodic protocols) or `∫_{H/2}^H λ dt / (H/2)`.
    pub divergence_statistic: f64,
    pub verdict: IntegralVerdict,
    pub relaxing_certified: bool,
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// `λ_t` on a uniform grid over `[0, horizon]`, wrapping periodic protocols.
pub fn lambda_profile(protocol: &Protocol, horizon: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 || !(horizon > 0.0) {
        return Err(Error::Precondition("need horizon > 0 and at least 2 samples".into()));
    }
    let basis = OperatorBasis::gell_mann(protocol.dim())?;
    let step = horizon / (samples - 1) as f64;
    par::try_map_range(samples, |k| {
        let last = k == samples - 1;
        let t = if last { horizon } else { step * k as f64 };
        let side = if last { crate::lindblad::Side::Left } else { crate::lindblad::Side::Right };
        rate_sample_with_side(protocol, &basis, t, side).map(|s| (t, s.lambda))
    })
}

/// Integrates `λ_t` and decides divergence.
///
/// Periodic protocols diverge iff the per-period integral exceeds `1e-12`.
/// One-shot schedules diverge iff the average of `λ_t` over the second half
/// of the horizon exceeds `1e-9` and the integral grows over that half by at
/// least a tenth of its first-half value; a summable tail fails the second
/// test once the horizon is long compared with its decay time.
pub fn relaxing_certificate(protocol: &Protocol, horizon: f64, samples: usize) -> Result<RateCertificate> {
    let lambda_profile = lambda_profile(protocol, horizon, samples)?;
    if lambda_profile.iter().any(|&(_, l)| l < 0.0) {
        return Err(Error::Precondition("negative decay rate encountered".into()));
    }
    let integral = trapezoid(&lambda_profile);
    let (statistic, divergent) = if protocol.is_periodic() {
        let per_samples = ((samples as f64) * (protocol.period() / horizon).min(1.0)).ceil().max(2.0) as usize;
        let per_period = trapezoid(&lambda_profile_window(protocol, per_samples)?);
        (per_period, per_period > PERIODIC_DIVERGENCE_THRESHOLD)
    } else {
        let mid = lambda_profile.len() / 2;
        let first = trapezoid(&lambda_profile[..=mid]);
        let second = trapezoid(&lambda_profile[mid..]);
        let span = horizon - lambda_profile[mid].0;
        let average = second / span;
        (average, average > TAIL_AVERAGE_THRESHOLD && second >= TAIL_GROWTH_FRACTION * first)
    };
    Ok(RateCertificate {
        lambda_profile,
        integral,
        divergence_statistic: statistic,
        verdict: if divergent { IntegralVerdict::Divergent } else { IntegralVerdict::FiniteSoFar },
        relaxing_certified: divergent,
    })
}

fn lambda_profile_window(protocol: &Protocol, samples: usize) -> Result<Vec<(f64, f64)>> {
    Ok(crate::lindblad::rate_profile(protocol, 0.0, protocol.period(), samples)?
        .into_iter()
        .map(|s| (s.t, s.lambda))
        .collect())
}

/// Trace distances `(initial, final)` between two random states evolved to `horizon`.
pub fn relaxation_probe(protocol: &Protocol, horizon: f64, seed: u64, opts: &PropagationOptions) -> Result<(f64, f64)> {
    let d = protocol.dim();
    let mut rng = par::sample_rng(seed, 0);
    let a = DensityMatrix::random(d, &mut rng);
    let b = DensityMatrix::random(d, &mut rng);
    let va = crate::propagation::schrodinger_propagate(protocol, a.op(), horizon, opts)?;
    let vb = crate::propagation::schrodinger_propagate(protocol, b.op(), horizon, opts)?;
    Ok((0.5 * trace_norm(&(a.op() - b.op()))?, 0.5 * trace_norm(&(&va - &vb))?))
}

/// Least-squares ratio `q` in `d_k ≈ C q^k`, ignoring distances at the
/// noise floor. Returns `(q, C)`, or `None` with fewer than two usable points.
pub fn geometric_fit(distances: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > DISTANCE_NOISE_FLOOR)
        .map(|(k, &d)| (k as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope.exp(), (my - slope * mx).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{DissipationChannel, LindbladGenerator, Segment};
    use crate::operator::pauli;
    use crate::propagation::monodromy_with;

    fn symmetric_pair(h: HermitianOp) -> LindbladGenerator {
        LindbladGenerator::new(
            h,
            vec![
                DissipationChannel::new(pauli::lowering(), 1.0).unwrap(),
                DissipationChannel::new(pauli::raising(), 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    fn pi_pulse() -> Protocol {
        let h = pauli::x().scale(std::f64::consts::FRAC_PI_2);
        Protocol::constant(LindbladGenerator::new(h, vec![]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn root_orders() {
        assert_eq!(root_order(Complex64::new(1.0, 0.0), UNIT_EIGENVALUE_TOLERANCE), Some(1));
        assert_eq!(root_order(Complex64::new(-1.0, 0.0), UNIT_EIGENVALUE_TOLERANCE), Some(2));
        assert_eq!(root_order(Complex64::new(0.0, 1.0), UNIT_EIGENVALUE_TOLERANCE), Some(4));
        assert_eq!(root_order(Complex64::from_polar(1.0, 1.0), UNIT_EIGENVALUE_TOLERANCE), None);
        assert_eq!(lcm(4, 6), 12);
    }

    #[test]
    fn pi_pulse_is_period_two() {
        let r = monodromy_spectrum(&pi_pulse(), &PropagationOptions::default()).unwrap();
        assert_eq!(r.classification, Classification::PeriodMultiple(2));
        assert_eq!(r.peripheral_count, 4);
        assert_eq!(r.unit_eigenvalue_count, 2);
        let minus = r.eigenvalues.iter().filter(|z| (*z + 1.0).norm() < 1e-9).count();
        assert_eq!(minus, 2);
    }

    #[test]
    fn symmetric_dissipation_has_mixed_cycle() {
        let p = Protocol::constant(symmetric_pair(HermitianOp::zeros(2)), 1.0).unwrap();
        let cycle = find_limit_cycle(&p, &PropagationOptions::default(), 8).unwrap();
        assert!(cycle.anchor.op().max_abs_diff(DensityMatrix::maximally_mixed(2).op()) < 1e-12);
        assert!(cycle.periodicity_residual < 1e-12);
        assert!(cycle.dual_method_discrepancy < 1e-8);
        assert_eq!(cycle.spectrum.classification, Classification::UniqueCycle);
        for (_, s) in &cycle.samples {
            assert!(s.op().max_abs_diff(cycle.anchor.op()) < 1e-12);
        }
    }

    #[test]
    fn degenerate_fixed_space_is_an_error() {
        let dephase = LindbladGenerator::dissipative(
            2,
            vec![DissipationChannel::new(pauli::z().into_matrix(), 1.0).unwrap()],
        )
        .unwrap();
        let p = Protocol::constant(dephase, 1.0).unwrap();
        let err = find_limit_cycle(&p, &PropagationOptions::default(), 4).unwrap_err();
        assert!(matches!(err, Error::DegenerateFixedSpace { count: 2 }));
    }

    #[test]
    fn unitary_contraction_ratio_is_one() {
        let r = contraction_check(&pi_pulse(), 0.0, 20, 2, &PropagationOptions::default(), 1).unwrap();
        assert_eq!(r.bound, 1.0);
        assert!((r.max_ratio - 1.0).abs() < 1e-10);
        assert!(r.pass);
    }

    #[test]
    fn contraction_rejects_invalid_window() {
        assert!(contraction_check(&pi_pulse(), 0.5, 4, 3, &PropagationOptions::default(), 1).is_err());
    }

    #[test]
    fn zero_observable_ratio() {
        let basis = OperatorBasis::gell_mann(2).unwrap();
        assert_eq!(contraction_ratio(&SuperOp::identity(2), &basis, &HermitianOp::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_identical_states_is_zero() {
        let p = Protocol::constant(symmetric_pair(pauli::x()), 1.0).unwrap();
        let rho = DensityMatrix::basis_state(2, 0);
        let trace = entropy_monotonicity_trace(&p, &rho, &rho, 2, 4, &PropagationOptions::default()).unwrap();
        assert!(trace.points.iter().all(|&(_, s)| s.abs() < 1e-9));
        assert!(trace.monotone);
    }

    #[test]
    fn entropy_rejects_infinite_start() {
        let p = Protocol::constant(symmetric_pair(pauli::x()), 1.0).unwrap();
        let err = entropy_monotonicity_trace(
            &p,
            &DensityMatrix::maximally_mixed(2),
            &DensityMatrix::basis_state(2, 0),
            1,
            2,
            &PropagationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfiniteEntropy));
    }

    #[test]
    fn periodic_certificate() {
        let p = Protocol::constant(symmetric_pair(HermitianOp::zeros(2)), 1.0).unwrap();
        let cert = relaxing_certificate(&p, 10.0, 101).unwrap();
        assert!(cert.relaxing_certified);
        assert!((cert.integral - 5.0).abs() < 1e-12);
        let cert = relaxing_certificate(&pi_pulse(), 10.0, 101).unwrap();
        assert!(!cert.relaxing_certified);
        assert_eq!(cert.integral, 0.0);
    }

    #[test]
    fn fit_recovers_ratio() {
        let d: Vec<f64> = (0..20).map(|k| 3.0 * 0.7f64.powi(k)).collect();
        let (q, c) = geometric_fit(&d).unwrap();
        assert!((q - 0.7).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
        assert!(geometric_fit(&[1e-15, 1e-16]).is_none());
    }

    #[test]
    fn linear_and_power_fixed_points_agree() {
        let h = pauli::x().scale(0.3);
        let gen = LindbladGenerator::new(
            h,
            vec![
                DissipationChannel::new(pauli::lowering(), 0.9).unwrap(),
                DissipationChannel::new(pauli::raising(), 0.2).unwrap(),
            ],
        )
        .unwrap();
        let p = Protocol::new(vec![Segment::constant(0.5, gen), Segment::constant(0.5, symmetric_pair(pauli::z()))], true)
            .unwrap();
        let m = monodromy_with(&p, &PropagationOptions::default()).unwrap();
        let lin = fixed_point_linear(m.superop()).unwrap();
        let (pow, _) = fixed_point_power(m.superop(), DensityMatrix::maximally_mixed(2).op(), 1e-13, 100_000).unwrap();
        assert!(trace_norm(&(&lin - &pow)).unwrap() < 1e-10);
    }
}
