//! Time-sliced propagators, the monodromy map and CPTP checks.
//!
//! Constant segments are exponentiated exactly. Modulated segments are cut
//! on a grid of `ceil(duration · slices_per_unit)` equal slices anchored at
//! the segment start, each slice frozen at one sample of the generator.
//! Slices never straddle a segment boundary. Requests that start or end
//! inside a slice use a shortened slice with the same rule, so the grid of
//! every other slice is unchanged.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{LindbladGenerator, Protocol};
use crate::operator::basis::OperatorBasis;
use crate::operator::eigen::eigh;
use crate::operator::expm::{matrix_exp, one_norm};
use crate::operator::superop::SuperOp;
use crate::operator::{DensityMatrix, Domain, HermitianOp};
use crate::par;

pub const DEFAULT_SLICES_PER_UNIT: usize = 256;
/// Upper bound on slices in a single request.
pub const MAX_SLICES: usize = 1 << 26;
/// A single exponential is split into powers once `‖L‖₁·dt` exceeds this.
const CHUNK_NORM: f64 = 64.0;
/// Slice endpoints closer than this fraction of a slice are merged.
const GRID_SNAP: f64 = 1e-9;
/// Slice exponentials are computed in batches of this size.
const BATCH: usize = 2048;

pub const CPTP_TRACE_TOLERANCE: f64 = 1e-9;
pub const CPTP_CHOI_TOLERANCE: f64 = 1e-8;

/// Where each slice samples the generator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceRule {
    /// Generator at the slice midpoint; second order in the slice width.
    #[default]
    Midpoint,
    /// Generator at the right end of each slice; first order.
    RightEndpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub slices_per_unit: usize,
    pub rule: SliceRule,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { slices_per_unit: DEFAULT_SLICES_PER_UNIT, rule: SliceRule::Midpoint }
    }
}

impl PropagationOptions {
    pub fn with_slices(slices_per_unit: usize) -> Self {
        Self { slices_per_unit, ..Self::default() }
    }
}

/// `V̂_{t_end, t_start}` (or its adjoint) as a full-space superoperator.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    superop: SuperOp,
    t_start: f64,
    t_end: f64,
    slice_count: usize,
    adjoint: bool,
}

impl Propagator {
    pub fn superop(&self) -> &SuperOp {
        &self.superop
    }

    pub fn into_superop(self) -> SuperOp {
        self.superop
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.superop.matrix()
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn slice_count(&self) -> usize {
        self.slice_count
    }

    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    pub fn apply(&self, x: &HermitianOp) -> Result<HermitianOp> {
        self.superop.apply(x)
    }
}

/// `exp(L̂·dt)`, or `exp(L̂†·dt)` when `adjoint`.
pub fn step_exponential(gen: &LindbladGenerator, dt: f64, adjoint: bool) -> Result<SuperOp> {
    let basis = OperatorBasis::gell_mann(gen.dim())?;
    step_exponential_with(&basis, gen, dt, adjoint)
}

pub(crate) fn step_exponential_with(
    basis: &OperatorBasis,
    gen: &LindbladGenerator,
    dt: f64,
    adjoint: bool,
) -> Result<SuperOp> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Precondition(format!("slice width must be positive, got {dt}")));
    }
    let l = gen.to_superop_with(basis, adjoint).into_matrix();
    let norm = one_norm(&l) * dt;
    let matrix = if norm > CHUNK_NORM {
        let squarings = (norm / CHUNK_NORM).log2().ceil() as i32;
        let mut e = matrix_exp(&l, dt * 0.5f64.powi(squarings))?;
        for _ in 0..squarings {
            e = &e * &e;
        }
        e
    } else {
        matrix_exp(&l, dt)?
    };
    SuperOp::from_matrix(gen.dim(), matrix, Domain::Full)
}

/// One slice: segment index, local interval and whether it is exact.
#[derive(Clone, Copy, Debug)]
struct Slice {
    segment: usize,
    a: f64,
    b: f64,
    start: f64,
}

fn check_request(protocol: &Protocol, t0: f64, t1: f64, opts: &PropagationOptions) -> Result<()> {
    if opts.slices_per_unit == 0 {
        return Err(Error::Precondition("slices_per_unit must be positive".into()));
    }
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Precondition(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if !protocol.is_periodic() {
        protocol.reduce_time(t0)?;
        protocol.reduce_time(t1)?;
    }
    Ok(())
}

/// Cuts `[t0, t1]` into slices on the protocol's grid.
fn plan(protocol: &Protocol, t0: f64, t1: f64, opts: &PropagationOptions) -> Result<Vec<Slice>> {
    check_request(protocol, t0, t1, opts)?;
    let period = protocol.period();
    let first = (t0 / period).floor() as i64;
    let last = (t1 / period).ceil() as i64;
    let mut slices = Vec::new();
    for k in first..last.max(first + 1) {
        let offset = k as f64 * period;
        for (i, seg) in protocol.segments().iter().enumerate() {
            let (s, e) = protocol.segment_bounds(i);
            let (abs_s, abs_e) = (offset + s, offset + e);
            if abs_e <= t0 || abs_s >= t1 {
                continue;
            }
            let u = (t0 - abs_s).max(0.0);
            let v = (t1 - abs_s).min(seg.duration);
            if v - u <= GRID_SNAP * seg.duration {
                continue;
            }
            if seg.is_constant() {
                slices.push(Slice { segment: i, a: u, b: v, start: abs_s + u });
                continue;
            }
            let n = ((seg.duration * opts.slices_per_unit as f64) - GRID_SNAP).ceil().max(1.0) as usize;
            let h = seg.duration / n as f64;
            let snap = |x: f64| {
                let r = (x / h).round();
                if (x - r * h).abs() <= GRID_SNAP * h {
                    r as usize
                } else {
                    usize::MAX
                }
            };
            let (ku, kv) = (snap(u), snap(v));
            let lo = if ku == usize::MAX { (u / h).floor() as usize } else { ku };
            let hi = if kv == usize::MAX { (v / h).ceil() as usize } else { kv };
            for j in lo..hi.min(n) {
                let a = if j == lo && ku == usize::MAX { u } else { j as f64 * h };
                let b = if j + 1 == hi && kv == usize::MAX { v } else if j + 1 == n { seg.duration } else { (j + 1) as f64 * h };
                if b > a {
                    slices.push(Slice { segment: i, a, b, start: abs_s + a });
                }
            }
            if slices.len() > MAX_SLICES {
                return Err(Error::Precondition(format!(
                    "more than {MAX_SLICES} slices requested; lower slices_per_unit or the horizon"
                )));
            }
        }
    }
    Ok(slices)
}

fn slice_generator(protocol: &Protocol, slice: &Slice, rule: SliceRule) -> Result<LindbladGenerator> {
    let seg = &protocol.segments()[slice.segment];
    let t = match rule {
        SliceRule::Midpoint => 0.5 * (slice.a + slice.b),
        SliceRule::RightEndpoint => slice.b,
    };
    seg.generator.at(t)
}

fn slice_exponential(
    protocol: &Protocol,
    basis: &OperatorBasis,
    slice: &Slice,
    rule: SliceRule,
    adjoint: bool,
) -> Result<DMatrix<f64>> {
    let gen = slice_generator(protocol, slice, rule)?;
    Ok(step_exponential_with(basis, &gen, slice.b - slice.a, adjoint)?.into_matrix())
}

/// Ordered product over `[t0, t1]` with optional snapshots at interior
/// times. Snapshots are branches off the main product and do not alter it.
fn march(
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    snapshots: &[f64],
    opts: &PropagationOptions,
    adjoint: bool,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>, usize)> {
    let slices = plan(protocol, t0, t1, opts)?;
    let basis = OperatorBasis::gell_mann(protocol.dim())?;
    let n = basis.len();
    let mut acc = DMatrix::<f64>::identity(n, n);
    let mut taken = Vec::with_capacity(snapshots.len());
    let mut next = 0usize;
    // snapshots at or before t0 are the identity
    while next < snapshots.len() && snapshots[next] <= t0 {
        taken.push(acc.clone());
        next += 1;
    }
    for batch in slices.chunks(BATCH) {
        let exps = par::try_map_range(batch.len(), |k| {
            slice_exponential(protocol, &basis, &batch[k], opts.rule, adjoint)
        })?;
        for (slice, e) in batch.iter().zip(exps) {
            let end = slice.start + (slice.b - slice.a);
            while next < snapshots.len() && snapshots[next] < end {
                let partial = Slice { b: slice.a + (snapshots[next] - slice.start), ..*slice };
                let branch = if partial.b - partial.a <= 0.0 {
                    acc.clone()
                } else {
                    let p = slice_exponential(protocol, &basis, &partial, opts.rule, adjoint)?;
                    if adjoint {
                        &acc * &p
                    } else {
                        &p * &acc
                    }
                };
                taken.push(branch);
                next += 1;
            }
            // V = S_N ⋯ S_1, V† = S_1† ⋯ S_N†
            acc = if adjoint { &acc * &e } else { &e * &acc };
        }
    }
    while next < snapshots.len() {
        taken.push(acc.clone());
        next += 1;
    }
    Ok((acc, taken, slices.len()))
}

/// `V̂_{t1,t0}` (or `V̂†_{t1,t0}`) as an ordered product of slice exponentials.
pub fn propagate_interval(
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    slices_per_unit: usize,
    adjoint: bool,
) -> Result<Propagator> {
    propagate_interval_with(protocol, t0, t1, &PropagationOptions::with_slices(slices_per_unit), adjoint)
}

pub fn propagate_interval_with(
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    opts: &PropagationOptions,
    adjoint: bool,
) -> Result<Propagator> {
    let (m, _, count) = march(protocol, t0, t1, &[], opts, adjoint)?;
    Ok(Propagator {
        superop: SuperOp::from_matrix(protocol.dim(), m, Domain::Full)?,
        t_start: t0,
        t_end: t1,
        slice_count: count,
        adjoint,
    })
}

/// `V̂_{T,0}`.
pub fn monodromy(protocol: &Protocol, slices_per_unit: usize) -> Result<Propagator> {
    monodromy_with(protocol, &PropagationOptions::with_slices(slices_per_unit))
}

pub fn monodromy_with(protocol: &Protocol, opts: &PropagationOptions) -> Result<Propagator> {
    propagate_interval_with(protocol, 0.0, protocol.period(), opts, false)
}

/// `V̂_{t_j, t0}` at each (sorted) `t_j`, plus the full `V̂_{t1, t0}`, from
/// one pass over the slices.
pub fn propagate_with_snapshots(
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    times: &[f64],
    opts: &PropagationOptions,
) -> Result<(Propagator, Vec<SuperOp>)> {
    if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|&t| t < t0 || t > t1) {
        return Err(Error::Precondition("snapshot times must be sorted and inside the interval".into()));
    }
    let (m, snaps, count) = march(protocol, t0, t1, times, opts, false)?;
    let d = protocol.dim();
    let snaps = snaps
        .into_iter()
        .map(|s| SuperOp::from_matrix(d, s, Domain::Full))
        .collect::<Result<Vec<_>>>()?;
    let prop = Propagator {
        superop: SuperOp::from_matrix(d, m, Domain::Full)?,
        t_start: t0,
        t_end: t1,
        slice_count: count,
        adjoint: false,
    };
    Ok((prop, snaps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub trace_defect: f64,
    pub choi_min_eigenvalue: f64,
    pub pass: bool,
}

/// Trace preservation and complete positivity of a Schrödinger-picture propagator.
pub fn cptp_check(prop: &Propagator) -> Result<CptpReport> {
    if prop.adjoint {
        return Err(Error::Precondition("CPTP check needs a Schrödinger-picture propagator".into()));
    }
    cptp_check_map(&prop.superop)
}

/// Worst `|tr Φ(|i⟩⟨j|) − δ_ij|` and the smallest Choi eigenvalue.
pub fn cptp_check_map(map: &SuperOp) -> Result<CptpReport> {
    if map.domain() != Domain::Full {
        return Err(Error::Precondition("CPTP check needs a full-space map".into()));
    }
    let d = map.dim();
    let choi = map.choi_matrix()?;
    let mut trace_defect: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let tr: num_complex::Complex64 = (0..d).map(|a| choi[(i * d + a, j * d + a)]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            trace_defect = trace_defect.max((tr - target).norm());
        }
    }
    let hermitian = (&choi + choi.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let eig = eigh(&hermitian)?;
    let choi_min_eigenvalue = eig.values[0];
    Ok(CptpReport {
        trace_defect,
        choi_min_eigenvalue,
        pass: trace_defect <= CPTP_TRACE_TOLERANCE && choi_min_eigenvalue >= -CPTP_CHOI_TOLERANCE,
    })
}

/// `X = x𝟙 + X′` with `tr X′ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableDecomposition {
    pub x: f64,
    pub x_prime: HermitianOp,
}

impl ObservableDecomposition {
    pub fn reconstruct(&self) -> HermitianOp {
        &HermitianOp::identity(self.x_prime.dim()).scale(self.x) + &self.x_prime
    }
}

pub fn decompose_observable(x: &HermitianOp) -> ObservableDecomposition {
    let scalar = x.trace() / x.dim() as f64;
    ObservableDecomposition { x: scalar, x_prime: x.traceless_part() }
}

/// `M^k` by repeated squaring.
pub fn superop_power(m: &SuperOp, k: u64) -> SuperOp {
    let n = m.matrix().nrows();
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut base = m.matrix().clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    SuperOp::from_matrix(m.dim(), result, m.domain()).expect("shape preserved")
}

/// `X_t = V̂†_{t,0} X_0`.
///
/// For periodic protocols, whole periods are applied as powers of the
/// adjoint monodromy: `V̂†_{kT+r,0} = (V̂†_{T,0})^k V̂†_{r,0}`.
pub fn heisenberg_propagate(
    protocol: &Protocol,
    x0: &HermitianOp,
    t: f64,
    opts: &PropagationOptions,
) -> Result<HermitianOp> {
    if x0.dim() != protocol.dim() {
        return Err(Error::DimensionMismatch { expected: protocol.dim(), found: x0.dim() });
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let period = protocol.period();
    if !protocol.is_periodic() || t <= period {
        return propagate_interval_with(protocol, 0.0, t, opts, true)?.apply(x0);
    }
    let k = (t / period).floor();
    let r = t - k * period;
    let mut x = if r > GRID_SNAP * period {
        propagate_interval_with(protocol, 0.0, r, opts, true)?.apply(x0)?
    } else {
        x0.clone()
    };
    let m_adj = propagate_interval_with(protocol, 0.0, period, opts, true)?;
    x = superop_power(m_adj.superop(), k as u64).apply(&x)?;
    Ok(x)
}

/// `ρ_t = V̂_{t,0} ρ_0`, using monodromy powers for whole periods.
pub fn schrodinger_propagate(
    protocol: &Protocol,
    rho0: &HermitianOp,
    t: f64,
    opts: &PropagationOptions,
) -> Result<HermitianOp> {
    if rho0.dim() != protocol.dim() {
        return Err(Error::DimensionMismatch { expected: protocol.dim(), found: rho0.dim() });
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let period = protocol.period();
    if !protocol.is_periodic() || t <= period {
        return propagate_interval_with(protocol, 0.0, t, opts, false)?.apply(rho0);
    }
    let k = (t / period).floor();
    let r = t - k * period;
    let m = monodromy_with(protocol, opts)?;
    let mut rho = superop_power(m.superop(), k as u64).apply(rho0)?;
    if r > GRID_SNAP * period {
        rho = propagate_interval_with(protocol, 0.0, r, opts, false)?.apply(&rho)?;
    }
    Ok(rho)
}

/// Monodromy plus propagators to `points` equally spaced times within the
/// first period, for sampling trajectories at `kT + t_j`.
#[derive(Clone, Debug)]
pub struct PeriodSampler {
    period: f64,
    times: Vec<f64>,
    within: Vec<SuperOp>,
    monodromy: Propagator,
    basis: OperatorBasis,
}

impl PeriodSampler {
    pub fn new(protocol: &Protocol, points_per_period: usize, opts: &PropagationOptions) -> Result<Self> {
        if !protocol.is_periodic() {
            return Err(Error::Precondition("period sampling needs a periodic protocol".into()));
        }
        if points_per_period == 0 {
            return Err(Error::Precondition("need at least one point per period".into()));
        }
        let period = protocol.period();
        let times: Vec<f64> = (0..points_per_period).map(|j| period * j as f64 / points_per_period as f64).collect();
        let (monodromy, within) = propagate_with_snapshots(protocol, 0.0, period, &times, opts)?;
        Ok(Self { period, times, within, monodromy, basis: OperatorBasis::gell_mann(protocol.dim())? })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Sample times within one period, starting at 0.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn monodromy(&self) -> &Propagator {
        &self.monodromy
    }

    /// `V̂_{t_j,0}`.
    pub fn within(&self, j: usize) -> &SuperOp {
        &self.within[j]
    }

    /// States at `kT + t_j` for `k < periods`, then at `periods·T`.
    pub fn trajectory(&self, rho0: &HermitianOp, periods: usize) -> Result<Vec<(f64, HermitianOp)>> {
        let mut out = Vec::with_capacity(periods * self.times.len() + 1);
        let mut start = rho0.clone();
        for k in 0..periods {
            for (j, &t) in self.times.iter().enumerate() {
                out.push((k as f64 * self.period + t, self.within[j].apply_with(&self.basis, &start)?));
            }
            start = self.monodromy.superop.apply_with(&self.basis, &start)?;
        }
        out.push((periods as f64 * self.period, start));
        Ok(out)
    }

    /// `ρ_{kT}` for `k = 0..=periods`.
    pub fn stroboscopic(&self, rho0: &HermitianOp, periods: usize) -> Result<Vec<HermitianOp>> {
        stroboscopic_with(&self.basis, self.monodromy.superop(), rho0, periods)
    }
}

/// `ρ_{kT}` for `k = 0..=periods` by repeated application of the monodromy.
pub fn stroboscopic(monodromy: &SuperOp, rho0: &HermitianOp, periods: usize) -> Result<Vec<HermitianOp>> {
    let basis = OperatorBasis::gell_mann(monodromy.dim())?;
    stroboscopic_with(&basis, monodromy, rho0, periods)
}

fn stroboscopic_with(
    basis: &OperatorBasis,
    monodromy: &SuperOp,
    rho0: &HermitianOp,
    periods: usize,
) -> Result<Vec<HermitianOp>> {
    let mut out = Vec::with_capacity(periods + 1);
    out.push(rho0.clone());
    for k in 0..periods {
        let next = monodromy.apply_with(basis, &out[k])?;
        out.push(next);
    }
    Ok(out)
}

/// Evolves a state and clips roundoff-level negativity.
pub fn evolve_state(map: &SuperOp, rho: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::clip(&map.apply(rho.op())?, 1e-8)
}
