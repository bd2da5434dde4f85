//! Piecewise-defined driving protocols.
//!
//! A protocol is an ordered list of segments, each either a constant
//! generator or a modulated one whose Hamiltonian terms, channel operator
//! terms and rates are scaled by closed-form functions of segment-local time.
//! Periodic protocols repeat with period equal to the total duration; the
//! others are one-shot schedules on `[0, total]`.

use serde::{Deserialize, Serialize};

use super::span::{rate_sample_with, RateSample};
use super::{DissipationChannel, LindbladGenerator};
use crate::error::{Error, Result};
use crate::operator::basis::OperatorBasis;
use crate::operator::{c, CMatrix, HermitianOp};
use crate::par;
use crate::serde_matrix::{ComplexMatrixRepr, HermitianRepr};

/// Grid used to check that modulated segments stay valid.
const VALIDATION_POINTS: usize = 1025;
const DURATION_SUM_TOLERANCE: f64 = 1e-12;

/// Scalar function of segment-local time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Const {
        value: f64,
    },
    /// `Σ_k coeffs[k] t^k`, degree at most 4.
    Poly {
        coeffs: Vec<f64>,
    },
    /// `amplitude · sin(omega t + phase)`
    Sin {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · cos(omega t + phase)`
    Cos {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `scale · (offset + t)^exponent`, `offset > 0`
    Power {
        scale: f64,
        offset: f64,
        exponent: f64,
    },
    Sum {
        terms: Vec<Coefficient>,
    },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Self::Const { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Const { value } => *value,
            Self::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &k| acc * t + k),
            Self::Sin { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            Self::Cos { amplitude, omega, phase } => amplitude * (omega * t + phase).cos(),
            Self::Power { scale, offset, exponent } => scale * (offset + t).powf(*exponent),
            Self::Sum { terms } => terms.iter().map(|c| c.eval(t)).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Const { value } => finite(&[*value]),
            Self::Poly { coeffs } => {
                if coeffs.is_empty() || coeffs.len() > 5 {
                    return Err(Error::InvalidProtocol(format!(
                        "polynomial needs 1 to 5 coefficients, got {}",
                        coeffs.len()
                    )));
                }
                finite(coeffs)
            }
            Self::Sin { amplitude, omega, phase } | Self::Cos { amplitude, omega, phase } => {
                finite(&[*amplitude, *omega, *phase])
            }
            Self::Power { scale, offset, exponent } => {
                if !(*offset > 0.0) {
                    return Err(Error::InvalidProtocol("power coefficient needs offset > 0".into()));
                }
                finite(&[*scale, *offset, *exponent])
            }
            Self::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProtocol("non-finite coefficient parameter".into()))
        }
    }
}

/// `coefficient(t) · matrix` contribution to the Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonianTerm", into = "RawHamiltonianTerm")]
pub struct HamiltonianTerm {
    pub matrix: HermitianOp,
    pub coefficient: Coefficient,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonianTerm {
    matrix: HermitianRepr,
    coefficient: Coefficient,
}

impl TryFrom<RawHamiltonianTerm> for HamiltonianTerm {
    type Error = Error;
    fn try_from(raw: RawHamiltonianTerm) -> Result<Self> {
        Ok(Self { matrix: raw.matrix.try_into()?, coefficient: raw.coefficient })
    }
}

impl From<HamiltonianTerm> for RawHamiltonianTerm {
    fn from(t: HamiltonianTerm) -> Self {
        Self { matrix: HermitianRepr::from(&t.matrix), coefficient: t.coefficient }
    }
}

/// `coefficient(t) · matrix` contribution to a channel operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperatorTerm", into = "RawOperatorTerm")]
pub struct OperatorTerm {
    pub matrix: CMatrix,
    pub coefficient: Coefficient,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperatorTerm {
    matrix: ComplexMatrixRepr,
    coefficient: Coefficient,
}

impl TryFrom<RawOperatorTerm> for OperatorTerm {
    type Error = Error;
    fn try_from(raw: RawOperatorTerm) -> Result<Self> {
        Ok(Self { matrix: raw.matrix.try_into()?, coefficient: raw.coefficient })
    }
}

impl From<OperatorTerm> for RawOperatorTerm {
    fn from(t: OperatorTerm) -> Self {
        Self { matrix: ComplexMatrixRepr::from(&t.matrix), coefficient: t.coefficient }
    }
}

pub type Term = HamiltonianTerm;

/// Channel with operator `Σ_k g_k(t) M_k` and rate `r(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatedChannel {
    pub terms: Vec<OperatorTerm>,
    pub rate: Coefficient,
}

impl ModulatedChannel {
    /// Fixed operator with a time-dependent rate.
    pub fn with_rate(operator: CMatrix, rate: Coefficient) -> Self {
        Self { terms: vec![OperatorTerm { matrix: operator, coefficient: Coefficient::constant(1.0) }], rate }
    }
}

/// Generator whose pieces carry closed-form time dependence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatedGenerator {
    pub dim: usize,
    #[serde(default)]
    pub hamiltonian: Vec<HamiltonianTerm>,
    #[serde(default)]
    pub channels: Vec<ModulatedChannel>,
}

impl ModulatedGenerator {
    /// Instantaneous generator at segment-local time `t`.
    pub fn at(&self, t: f64) -> Result<LindbladGenerator> {
        let d = self.dim;
        let mut h = CMatrix::zeros(d, d);
        for term in &self.hamiltonian {
            h += term.matrix.matrix() * c(term.coefficient.eval(t), 0.0);
        }
        let mut channels = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let mut a = CMatrix::zeros(d, d);
            for term in &ch.terms {
                a += &term.matrix * c(term.coefficient.eval(t), 0.0);
            }
            let rate = ch.rate.eval(t);
            channels.push(DissipationChannel::new(a, rate).map_err(|e| {
                Error::InvalidProtocol(format!("channel invalid at local time {t}: {e}"))
            })?);
        }
        LindbladGenerator::new(HermitianOp::from_matrix_unchecked(h), channels)
    }

    fn validate(&self, duration: f64) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidProtocol("dimension must be at least 2".into()));
        }
        for term in &self.hamiltonian {
            term.coefficient.validate()?;
            if term.matrix.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: term.matrix.dim() });
            }
        }
        for ch in &self.channels {
            ch.rate.validate()?;
            if ch.terms.is_empty() {
                return Err(Error::InvalidProtocol("modulated channel has no operator terms".into()));
            }
            for term in &ch.terms {
                term.coefficient.validate()?;
                if term.matrix.nrows() != self.dim || term.matrix.ncols() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, found: term.matrix.nrows() });
                }
            }
        }
        for k in 0..VALIDATION_POINTS {
            let t = duration * k as f64 / (VALIDATION_POINTS - 1) as f64;
            for ch in &self.channels {
                let r = ch.rate.eval(t);
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidProtocol(format!(
                        "rate reaches {r} at local time {t}; rates must stay positive"
                    )));
                }
            }
            self.at(t)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorSpec {
    Constant(LindbladGenerator),
    Modulated(ModulatedGenerator),
}

impl GeneratorSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(g) => g.dim(),
            Self::Modulated(m) => m.dim,
        }
    }

    pub fn at(&self, local_t: f64) -> Result<LindbladGenerator> {
        match self {
            Self::Constant(g) => Ok(g.clone()),
            Self::Modulated(m) => m.at(local_t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration: f64,
    pub generator: GeneratorSpec,
}

impl Segment {
    pub fn constant(duration: f64, gen: LindbladGenerator) -> Self {
        Self { duration, generator: GeneratorSpec::Constant(gen) }
    }

    pub fn modulated(duration: f64, gen: ModulatedGenerator) -> Self {
        Self { duration, generator: GeneratorSpec::Modulated(gen) }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.generator, GeneratorSpec::Constant(_))
    }
}

/// Which one-sided limit to take at a segment boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Segments are `[start, end)`.
    Right,
    /// Segments are `(start, end]`.
    Left,
}

/// Sequence of segments, periodic or one-shot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProtocol", into = "RawProtocol")]
pub struct Protocol {
    segments: Vec<Segment>,
    periodic: bool,
    starts: Vec<f64>,
    total: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    #[serde(default = "default_periodic")]
    periodic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    segments: Vec<Segment>,
}

fn default_periodic() -> bool {
    true
}

impl TryFrom<RawProtocol> for Protocol {
    type Error = Error;
    fn try_from(raw: RawProtocol) -> Result<Self> {
        let p = Protocol::new(raw.segments, raw.periodic)?;
        if let Some(period) = raw.period {
            if (period - p.total).abs() > DURATION_SUM_TOLERANCE * p.total {
                return Err(Error::InvalidProtocol(format!(
                    "segment durations sum to {}, declared period is {period}",
                    p.total
                )));
            }
        }
        Ok(p)
    }
}

impl From<Protocol> for RawProtocol {
    fn from(p: Protocol) -> Self {
        Self { periodic: p.periodic, period: Some(p.total), segments: p.segments }
    }
}

impl Protocol {
    pub fn new(segments: Vec<Segment>, periodic: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidProtocol("protocol has no segments".into()));
        }
        let dim = segments[0].generator.dim();
        let mut starts = Vec::with_capacity(segments.len());
        let mut total = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.duration > 0.0) || !seg.duration.is_finite() {
                return Err(Error::InvalidProtocol(format!(
                    "segment {i} has non-positive duration {}",
                    seg.duration
                )));
            }
            if seg.generator.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: seg.generator.dim() });
            }
            if let GeneratorSpec::Modulated(m) = &seg.generator {
                m.validate(seg.duration).map_err(|e| match e {
                    Error::InvalidProtocol(msg) => Error::InvalidProtocol(format!("segment {i}: {msg}")),
                    other => other,
                })?;
            }
            starts.push(total);
            total += seg.duration;
        }
        Ok(Self { segments, periodic, starts, total })
    }

    /// Single constant generator repeated with period `duration`.
    pub fn constant(gen: LindbladGenerator, duration: f64) -> Result<Self> {
        Self::new(vec![Segment::constant(duration, gen)], true)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Period `T` (for one-shot schedules, the horizon they cover).
    pub fn period(&self) -> f64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.segments[0].generator.dim()
    }

    /// `[start, end)` of segment `i` within one period.
    pub fn segment_bounds(&self, i: usize) -> (f64, f64) {
        (self.starts[i], self.starts[i] + self.segments[i].duration)
    }

    /// Time within the first period equivalent to `t`.
    pub fn reduce_time(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Precondition(format!("time {t} is not finite")));
        }
        if self.periodic {
            Ok(t.rem_euclid(self.total))
        } else if t < 0.0 || t > self.total * (1.0 + DURATION_SUM_TOLERANCE) {
            Err(Error::Precondition(format!("time {t} outside schedule [0, {}]", self.total)))
        } else {
            Ok(t.min(self.total))
        }
    }

    /// Segment index and local time at `t`, taking the given one-sided limit
    /// at boundaries.
    pub fn locate(&self, t: f64, side: Side) -> Result<(usize, f64)> {
        let mut tau = self.reduce_time(t)?;
        let last = self.segments.len() - 1;
        if side == Side::Left && self.periodic && tau == 0.0 {
            tau = self.total;
        }
        let idx = match side {
            Side::Right => {
                if tau >= self.total {
                    last
                } else {
                    self.starts.partition_point(|&s| s <= tau).saturating_sub(1)
                }
            }
            Side::Left => {
                if tau <= 0.0 {
                    0
                } else {
                    self.starts.partition_point(|&s| s < tau).saturating_sub(1)
                }
            }
        };
        let local = (tau - self.starts[idx]).clamp(0.0, self.segments[idx].duration);
        Ok((idx, local))
    }

    /// Generator at `t` with segments taken as `[start, end)`.
    pub fn generator_at(&self, t: f64) -> Result<LindbladGenerator> {
        self.generator_at_side(t, Side::Right)
    }

    pub fn generator_at_side(&self, t: f64, side: Side) -> Result<LindbladGenerator> {
        let (i, local) = self.locate(t, side)?;
        self.segments[i].generator.at(local)
    }
}

/// `λ_t` and span verdicts on a uniform closed grid over `[t0, t1]`.
///
/// The first point takes the right limit and the last point the left limit,
/// so a window that ends exactly on a segment boundary is evaluated with the
/// generator that is active inside the window.
pub fn rate_profile(protocol: &Protocol, t0: f64, t1: f64, samples: usize) -> Result<Vec<RateSample>> {
    if samples < 2 {
        return Err(Error::Precondition("rate grid needs at least 2 samples".into()));
    }
    if !(t0 < t1) || t0 < 0.0 {
        return Err(Error::Precondition(format!("invalid window [{t0}, {t1}]")));
    }
    if t1 > protocol.period() * (1.0 + DURATION_SUM_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "window end {t1} exceeds the period {}",
            protocol.period()
        )));
    }
    let basis = OperatorBasis::gell_mann(protocol.dim())?;
    let step = (t1 - t0) / (samples - 1) as f64;
    par::try_map_range(samples, |k| {
        let (t, side) = if k == samples - 1 { (t1, Side::Left) } else { (t0 + step * k as f64, Side::Right) };
        rate_sample_with_side(protocol, &basis, t, side)
    })
}

pub(crate) fn rate_sample_with_side(
    protocol: &Protocol,
    basis: &OperatorBasis,
    t: f64,
    side: Side,
) -> Result<RateSample> {
    let gen = protocol.generator_at_side(t, side)?;
    rate_sample_with(basis, &gen, t)
}

/// `Λ = min λ_t` over a uniform closed grid on `[t0, t1]`.
pub fn min_rate_over_window(protocol: &Protocol, t0: f64, t1: f64, samples: usize) -> Result<f64> {
    let profile = rate_profile(protocol, t0, t1, samples)?;
    let first_dim = profile[0].span_dim;
    if profile.iter().any(|s| s.span_dim != first_dim) {
        log::warn!("span dimension changes across the window [{t0}, {t1}]");
    }
    Ok(profile.iter().map(|s| s.lambda).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::lambda_at;
    use crate::operator::pauli;

    fn qubit_pair(rate: f64) -> LindbladGenerator {
        LindbladGenerator::dissipative(
            2,
            vec![
                DissipationChannel::new(pauli::lowering(), rate).unwrap(),
                DissipationChannel::new(pauli::raising(), rate).unwrap(),
            ],
        )
        .unwrap()
    }

    fn modulated_rate_protocol() -> Protocol {
        let rate = Coefficient::Sum {
            terms: vec![
                Coefficient::constant(1.0),
                Coefficient::Sin { amplitude: 0.5, omega: 2.0 * std::f64::consts::PI, phase: 0.0 },
            ],
        };
        let gen = ModulatedGenerator {
            dim: 2,
            hamiltonian: vec![HamiltonianTerm {
                matrix: pauli::x(),
                coefficient: Coefficient::Cos { amplitude: 1.0, omega: 3.0, phase: 0.1 },
            }],
            channels: vec![
                ModulatedChannel::with_rate(pauli::lowering(), rate.clone()),
                ModulatedChannel::with_rate(pauli::raising(), rate),
            ],
        };
        Protocol::new(vec![Segment::modulated(1.0, gen)], true).unwrap()
    }

    #[test]
    fn coefficient_eval() {
        let p = Coefficient::Poly { coeffs: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.eval(2.0), 17.0);
        let pw = Coefficient::Power { scale: 1.0, offset: 1.0, exponent: -2.0 };
        assert_eq!(pw.eval(1.0), 0.25);
        assert!(Coefficient::Poly { coeffs: vec![0.0; 6] }.validate().is_err());
        assert!(Coefficient::Power { scale: 1.0, offset: 0.0, exponent: -2.0 }.validate().is_err());
    }

    #[test]
    fn rejects_bad_segments() {
        assert!(Protocol::new(vec![], true).is_err());
        assert!(Protocol::new(vec![Segment::constant(0.0, qubit_pair(1.0))], true).is_err());
        let negative = ModulatedGenerator {
            dim: 2,
            hamiltonian: vec![],
            channels: vec![ModulatedChannel::with_rate(
                pauli::lowering(),
                Coefficient::Sin { amplitude: 1.0, omega: 1.0, phase: 0.0 },
            )],
        };
        let err = Protocol::new(vec![Segment::modulated(1.0, negative)], true).unwrap_err();
        assert!(matches!(err, Error::InvalidProtocol(_)));
        let mixed = vec![
            Segment::constant(1.0, qubit_pair(1.0)),
            Segment::constant(1.0, LindbladGenerator::dissipative(3, vec![]).unwrap()),
        ];
        assert!(Protocol::new(mixed, true).is_err());
    }

    #[test]
    fn locate_boundaries() {
        let p = Protocol::new(
            vec![
                Segment::constant(1.0, qubit_pair(1.0)),
                Segment::constant(2.0, LindbladGenerator::dissipative(2, vec![]).unwrap()),
            ],
            true,
        )
        .unwrap();
        assert_eq!(p.period(), 3.0);
        assert_eq!(p.locate(1.0, Side::Right).unwrap().0, 1);
        assert_eq!(p.locate(1.0, Side::Left).unwrap().0, 0);
        assert_eq!(p.locate(0.0, Side::Left).unwrap().0, 1);
        assert_eq!(p.locate(3.5, Side::Right).unwrap(), (0, 0.5));
        let one_shot = Protocol::new(p.segments().to_vec(), false).unwrap();
        assert!(one_shot.locate(3.5, Side::Right).is_err());
        assert_eq!(one_shot.locate(3.0, Side::Right).unwrap(), (1, 2.0));
    }

    #[test]
    fn evaluation_is_periodic() {
        let p = modulated_rate_protocol();
        for k in 0..20 {
            let t = 0.05 * k as f64;
            let a = p.generator_at(t).unwrap().to_superop(false);
            let b = p.generator_at(t + p.period()).unwrap().to_superop(false);
            assert!((a.matrix() - b.matrix()).amax() <= 1e-12);
        }
    }

    #[test]
    fn constant_window_rate() {
        let p = Protocol::constant(qubit_pair(1.0), 2.0).unwrap();
        for samples in [2, 5, 17] {
            let r = min_rate_over_window(&p, 0.0, 2.0, samples).unwrap();
            assert!((r - lambda_at(&qubit_pair(1.0)).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn window_ending_on_boundary_uses_left_limit() {
        let p = Protocol::new(
            vec![
                Segment::constant(1.0, qubit_pair(1.0)),
                Segment::constant(1.0, LindbladGenerator::dissipative(2, vec![]).unwrap()),
            ],
            true,
        )
        .unwrap();
        let r = min_rate_over_window(&p, 0.0, 1.0, 9).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        assert_eq!(min_rate_over_window(&p, 0.0, 2.0, 9).unwrap(), 0.0);
    }

    #[test]
    fn nested_grids_do_not_increase() {
        let p = modulated_rate_protocol();
        let mut previous = f64::INFINITY;
        for samples in [3, 5, 9, 17, 33, 65] {
            let r = min_rate_over_window(&p, 0.0, 1.0, samples).unwrap();
            assert!(r <= previous + 1e-15);
            previous = r;
        }
        // λ_t = (1 + 0.5 sin 2πt)/2, minimum 0.25 at t = 3/4
        assert!((previous - 0.25).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let p = modulated_rate_protocol();
        let s = serde_json::to_string(&p).unwrap();
        let back: Protocol = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_unknown_keys_and_bad_period() {
        let p = modulated_rate_protocol();
        let mut v = serde_json::to_value(&p).unwrap();
        v["period"] = serde_json::json!(2.0);
        assert!(serde_json::from_value::<Protocol>(v.clone()).is_err());
        v["period"] = serde_json::json!(1.0);
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<Protocol>(v).is_err());
    }
}
