//! Built-in example systems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cycle::{hypothesis_windows, monodromy_spectrum, relaxing_certificate, Classification};
use crate::error::{Error, Result};
use crate::lindblad::{
    Coefficient, DissipationChannel, HamiltonianTerm, LindbladGenerator, ModulatedChannel, ModulatedGenerator,
    Protocol, Segment,
};
use crate::operator::{gaussian_matrix, hs_inner, ket_bra, pauli, CMatrix, DensityMatrix, HermitianOp};
use crate::par::sample_rng;
use crate::propagation::{monodromy_with, stroboscopic, PropagationOptions};
use crate::serde_matrix::HermitianRepr;

/// Observable whose stroboscopic expectation is expected to stay constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConserved", into = "RawConserved")]
pub struct ConservedObservable {
    pub name: String,
    pub matrix: HermitianOp,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConserved {
    name: String,
    matrix: HermitianRepr,
}

impl TryFrom<RawConserved> for ConservedObservable {
    type Error = Error;
    fn try_from(raw: RawConserved) -> Result<Self> {
        Ok(Self { name: raw.name, matrix: raw.matrix.try_into()? })
    }
}

impl From<ConservedObservable> for RawConserved {
    fn from(c: ConservedObservable) -> Self {
        Self { name: c.name, matrix: HermitianRepr::from(&c.matrix) }
    }
}

/// What a model is expected to show.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_eigenvalue_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conserved: Vec<ConservedObservable>,
    /// End of the window `[0, τ]` on which the span conditions hold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectations>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProtocol(format!("{name} must be positive, got {x}")))
    }
}

fn channel(op: CMatrix, rate: f64) -> Result<DissipationChannel> {
    DissipationChannel::new(op, rate)
}

/// Qubit with a rotating transverse drive
/// `H_t = (A/2)(cos(2πt/T)σx + sin(2πt/T)σy)` and always-on decay and
/// excitation channels.
pub fn build_driven_qubit(gamma_down: f64, gamma_up: f64, drive_amplitude: f64, period: f64) -> Result<ModelSpec> {
    positive("gamma_down", gamma_down)?;
    positive("gamma_up", gamma_up)?;
    positive("drive period", period)?;
    if !drive_amplitude.is_finite() {
        return Err(Error::InvalidProtocol("drive amplitude must be finite".into()));
    }
    let omega = 2.0 * PI / period;
    let half = 0.5 * drive_amplitude;
    let gen = ModulatedGenerator {
        dim: 2,
        hamiltonian: vec![
            HamiltonianTerm { matrix: pauli::x(), coefficient: Coefficient::Cos { amplitude: half, omega, phase: 0.0 } },
            HamiltonianTerm { matrix: pauli::y(), coefficient: Coefficient::Sin { amplitude: half, omega, phase: 0.0 } },
        ],
        channels: vec![
            ModulatedChannel::with_rate(pauli::lowering(), Coefficient::constant(gamma_down)),
            ModulatedChannel::with_rate(pauli::raising(), Coefficient::constant(gamma_up)),
        ],
    };
    Ok(ModelSpec {
        name: "driven_qubit".into(),
        protocol: Protocol::new(vec![Segment::modulated(period, gen)], true)?,
        expected: Some(Expectations {
            classification: Some(Classification::UniqueCycle),
            unit_eigenvalue_count: Some(1),
            window: Some(period),
            ..Default::default()
        }),
    })
}

/// `(π/(2s))(|a⟩⟨b| + |b⟩⟨a|)` applied for time `s` swaps `a` and `b`.
fn swap_segment(d: usize, a: usize, b: usize, duration: f64) -> Result<Segment> {
    let m = (ket_bra(d, a, b) + ket_bra(d, b, a)) * crate::operator::c(PI / (2.0 * duration), 0.0);
    Ok(Segment::constant(duration, LindbladGenerator::new(HermitianOp::new(m)?, vec![])?))
}

/// Thermalization of the level pairs `(lo, hi)`: `|lo⟩⟨hi|` at `down`, `|hi⟩⟨lo|` at `up`.
fn pair_channels(d: usize, pairs: &[(usize, usize)], down: f64, up: f64) -> Result<Vec<DissipationChannel>> {
    let mut out = Vec::with_capacity(2 * pairs.len());
    for &(lo, hi) in pairs {
        out.push(channel(ket_bra(d, lo, hi), down)?);
        out.push(channel(ket_bra(d, hi, lo), up)?);
    }
    Ok(out)
}

/// `Q = |1⟩⟨1| + |3⟩⟨3|` in one-based level labels.
pub fn counterexample_conserved() -> HermitianOp {
    HermitianOp::from_real_diagonal(&[1.0, 0.0, 1.0, 0.0]).expect("valid diagonal")
}

fn counterexample_segments(gamma_down: f64, gamma_up: f64, step: f64, mix_rate: Option<f64>) -> Result<Vec<Segment>> {
    positive("gamma_down", gamma_down)?;
    positive("gamma_up", gamma_up)?;
    positive("step duration", step)?;
    let d = 4;
    // levels |1⟩..|4⟩ are indices 0..3
    let mut first = pair_channels(d, &[(0, 2), (1, 3)], gamma_down, gamma_up)?;
    if let Some(mix) = mix_rate {
        positive("mix rate", mix)?;
        first.extend(pair_channels(d, &[(0, 1)], mix, mix)?);
    }
    let third = pair_channels(d, &[(0, 1), (2, 3)], gamma_down, gamma_up)?;
    Ok(vec![
        Segment::constant(step, LindbladGenerator::dissipative(d, first)?),
        swap_segment(d, 1, 2, step)?,
        Segment::constant(step, LindbladGenerator::dissipative(d, third)?),
        swap_segment(d, 1, 2, step)?,
    ])
}

/// Four-level system whose pairs thermalize separately, interleaved with
/// swaps of `|2⟩` and `|3⟩`. The population of `{|1⟩, |3⟩}` survives each
/// period, so the long-time state depends on the initial condition.
pub fn build_counterexample(gamma: f64, step_duration: f64) -> Result<ModelSpec> {
    build_counterexample_rates(gamma, gamma, step_duration)
}

/// Same system with different downward and upward rates within each pair.
pub fn build_counterexample_rates(gamma_down: f64, gamma_up: f64, step_duration: f64) -> Result<ModelSpec> {
    let segments = counterexample_segments(gamma_down, gamma_up, step_duration, None)?;
    Ok(ModelSpec {
        name: if gamma_down == gamma_up { "counterexample".into() } else { "counterexample_asymmetric".into() },
        protocol: Protocol::new(segments, true)?,
        expected: Some(Expectations {
            classification: Some(Classification::Degenerate),
            unit_eigenvalue_count: Some(2),
            conserved: vec![ConservedObservable { name: "Q".into(), matrix: counterexample_conserved() }],
            ..Default::default()
        }),
    })
}

/// The four-level system with an extra `|1⟩ ↔ |2⟩` channel in the first
/// step, which makes the span irreducible there.
pub fn build_repaired_counterexample(gamma: f64, step_duration: f64, mix_rate: f64) -> Result<ModelSpec> {
    let segments = counterexample_segments(gamma, gamma, step_duration, Some(mix_rate))?;
    Ok(ModelSpec {
        name: "repaired".into(),
        protocol: Protocol::new(segments, true)?,
        expected: Some(Expectations {
            classification: Some(Classification::UniqueCycle),
            unit_eigenvalue_count: Some(1),
            window: Some(step_duration),
            ..Default::default()
        }),
    })
}

/// `H = (π/2)σx` for unit time with no dissipation: the monodromy is
/// conjugation by `σx`.
pub fn build_pi_pulse() -> Result<ModelSpec> {
    let h = pauli::x().scale(PI / 2.0);
    Ok(ModelSpec {
        name: "pi_pulse".into(),
        protocol: Protocol::constant(LindbladGenerator::new(h, vec![])?, 1.0)?,
        expected: Some(Expectations {
            classification: Some(Classification::PeriodMultiple(2)),
            unit_eigenvalue_count: Some(2),
            relaxing: Some(false),
            ..Default::default()
        }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `γ_t = 1`
    Divergent,
    /// `γ_t = (1 + t)^{-2}`
    Convergent,
}

/// One-shot qubit schedule on `[0, horizon]` with
/// `H_t = cos(t)σx + cos(√2 t)σz` and decay/excitation at rate `γ_t`.
pub fn build_quasiperiodic_qubit(kind: ScheduleKind, horizon: f64) -> Result<ModelSpec> {
    positive("horizon", horizon)?;
    let rate = match kind {
        ScheduleKind::Divergent => Coefficient::constant(1.0),
        ScheduleKind::Convergent => Coefficient::Power { scale: 1.0, offset: 1.0, exponent: -2.0 },
    };
    let gen = ModulatedGenerator {
        dim: 2,
        hamiltonian: vec![
            HamiltonianTerm { matrix: pauli::x(), coefficient: Coefficient::Cos { amplitude: 1.0, omega: 1.0, phase: 0.0 } },
            HamiltonianTerm {
                matrix: pauli::z(),
                coefficient: Coefficient::Cos { amplitude: 1.0, omega: std::f64::consts::SQRT_2, phase: 0.0 },
            },
        ],
        channels: vec![
            ModulatedChannel::with_rate(pauli::lowering(), rate.clone()),
            ModulatedChannel::with_rate(pauli::raising(), rate),
        ],
    };
    let name = match kind {
        ScheduleKind::Divergent => "quasiperiodic_divergent",
        ScheduleKind::Convergent => "quasiperiodic_convergent",
    };
    Ok(ModelSpec {
        name: name.into(),
        protocol: Protocol::new(vec![Segment::modulated(horizon, gen)], false)?,
        expected: Some(Expectations { relaxing: Some(kind == ScheduleKind::Divergent), ..Default::default() }),
    })
}

/// `∫₀^H (1+t)^{-2}/2 dt`, the rate integral of the convergent schedule.
pub fn convergent_rate_integral(horizon: f64) -> f64 {
    0.5 * (1.0 - 1.0 / (1.0 + horizon))
}

pub const DEFAULT_HORIZON: f64 = 60.0;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "driven_qubit",
    "counterexample",
    "counterexample_asymmetric",
    "repaired",
    "pi_pulse",
    "quasiperiodic_divergent",
    "quasiperiodic_convergent",
];

/// Built-in model with default parameters.
pub fn builtin(name: &str) -> Result<ModelSpec> {
    match name {
        "driven_qubit" => build_driven_qubit(1.0, 1.0, 1.0, 1.0),
        "counterexample" => build_counterexample(1.0, 1.0),
        "counterexample_asymmetric" => build_counterexample_rates(1.0, 0.5, 1.0),
        "repaired" => build_repaired_counterexample(1.0, 1.0, 1.0),
        "pi_pulse" => build_pi_pulse(),
        "quasiperiodic_divergent" => build_quasiperiodic_qubit(ScheduleKind::Divergent, DEFAULT_HORIZON),
        "quasiperiodic_convergent" => build_quasiperiodic_qubit(ScheduleKind::Convergent, DEFAULT_HORIZON),
        other => Err(Error::InvalidProtocol(format!(
            "unknown model '{other}'; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Outcome of one embedded expectation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Periods over which conserved observables are tracked.
pub const CONSERVATION_PERIODS: usize = 50;
pub const CONSERVATION_TOLERANCE: f64 = 1e-8;
/// Random initial states per conserved observable.
pub const CONSERVATION_STATES: u64 = 10;

/// Evaluates every expectation a model carries. `samples` sets the rate
/// grid (per segment for the window, over the horizon for the certificate).
pub fn verify_expectations(
    spec: &ModelSpec,
    opts: &PropagationOptions,
    samples: usize,
    seed: u64,
) -> Result<Vec<ExpectationCheck>> {
    let Some(exp) = &spec.expected else {
        return Ok(Vec::new());
    };
    let p = &spec.protocol;
    let mut out = Vec::new();
    let needs_spectrum = exp.classification.is_some() || exp.unit_eigenvalue_count.is_some();
    let spectrum = if needs_spectrum && p.is_periodic() { Some(monodromy_spectrum(p, opts)?) } else { None };
    if let Some(want) = exp.classification {
        out.push(match &spectrum {
            Some(s) => ExpectationCheck {
                name: "classification".into(),
                pass: s.classification == want,
                detail: format!("expected {want}, got {}", s.classification),
            },
            None => ExpectationCheck {
                name: "classification".into(),
                pass: false,
                detail: "one-shot schedules have no monodromy".into(),
            },
        });
    }
    if let Some(want) = exp.unit_eigenvalue_count {
        let got = spectrum.as_ref().map(|s| s.unit_eigenvalue_count);
        out.push(ExpectationCheck {
            name: "unit_eigenvalue_count".into(),
            pass: got == Some(want),
            detail: format!("expected {want}, got {}", got.map_or("none".to_string(), |g| g.to_string())),
        });
    }
    if !exp.conserved.is_empty() {
        let m = monodromy_with(p, opts)?;
        for obs in &exp.conserved {
            let mut drift = 0.0f64;
            for k in 0..CONSERVATION_STATES {
                let rho0 = DensityMatrix::random(p.dim(), &mut sample_rng(seed, k));
                let traj = stroboscopic(m.superop(), rho0.op(), CONSERVATION_PERIODS)?;
                let q0 = hs_inner(&obs.matrix, rho0.op())?;
                for rho in &traj {
                    drift = drift.max((hs_inner(&obs.matrix, rho)? - q0).abs());
                }
            }
            out.push(ExpectationCheck {
                name: format!("conserved {}", obs.name),
                pass: drift <= CONSERVATION_TOLERANCE,
                detail: format!("largest drift over {CONSERVATION_PERIODS} periods {drift:.3e}"),
            });
        }
    }
    if let Some(want) = exp.window {
        let windows = hypothesis_windows(p, samples)?;
        let longest = windows.iter().map(|w| w.length()).fold(0.0, f64::max);
        // modulated segments resolve window ends to one grid step
        let slack = p
            .segments()
            .iter()
            .filter(|s| !s.is_constant())
            .map(|s| s.duration / (samples - 1) as f64)
            .fold(1e-12, f64::max);
        out.push(ExpectationCheck {
            name: "window".into(),
            pass: (longest - want).abs() <= slack,
            detail: format!("expected τ = {want}, longest window {longest}"),
        });
    }
    if let Some(want) = exp.relaxing {
        let horizon = if p.is_periodic() { 10.0 * p.period() } else { p.period() };
        let cert = relaxing_certificate(p, horizon, samples)?;
        out.push(ExpectationCheck {
            name: "relaxing".into(),
            pass: cert.relaxing_certified == want,
            detail: format!(
                "expected {want}, certificate {} (∫λ = {:.6}, statistic {:.3e})",
                cert.relaxing_certified, cert.integral, cert.divergence_statistic
            ),
        });
    }
    Ok(out)
}

/// Random periodic protocol: a constant segment with random channels
/// followed by a segment with an oscillating Hamiltonian and rate.
pub fn random_protocol<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Protocol> {
    let channels = rng.random_range(1..=3usize);
    let chans = (0..channels)
        .map(|_| channel(gaussian_matrix(dim, rng), rng.random_range(0.2..1.5)))
        .collect::<Result<Vec<_>>>()?;
    let first = LindbladGenerator::new(HermitianOp::random(dim, rng), chans)?;
    let omega = rng.random_range(1.0..6.0);
    let modulated = ModulatedGenerator {
        dim,
        hamiltonian: vec![
            HamiltonianTerm { matrix: HermitianOp::random(dim, rng), coefficient: Coefficient::constant(1.0) },
            HamiltonianTerm {
                matrix: HermitianOp::random(dim, rng),
                coefficient: Coefficient::Cos { amplitude: 1.0, omega, phase: rng.random_range(0.0..PI) },
            },
        ],
        channels: vec![ModulatedChannel::with_rate(
            gaussian_matrix(dim, rng),
            Coefficient::Sum {
                terms: vec![
                    Coefficient::constant(1.0),
                    Coefficient::Sin { amplitude: 0.5, omega, phase: 0.0 },
                ],
            },
        )],
    };
    Protocol::new(
        vec![
            Segment::constant(rng.random_range(0.2..1.0), first),
            Segment::modulated(rng.random_range(0.2..1.0), modulated),
        ],
        true,
    )
}
