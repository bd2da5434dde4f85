//! GKSL generators, periodic protocols and the algebraic conditions on the
//! span of the Lindblad operators.
//!
//! Units: `ħ = 1`, Hamiltonians are angular frequencies and rates are
//! inverse times.

pub mod protocol;
pub mod span;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::basis::OperatorBasis;
use crate::operator::superop::SuperOp;
use crate::operator::{c, CMatrix, HermitianOp};
use crate::serde_matrix::{ComplexMatrixRepr, HermitianRepr};

pub use protocol::{
    min_rate_over_window, rate_profile, Coefficient, GeneratorSpec, HamiltonianTerm, ModulatedChannel,
    ModulatedGenerator, OperatorTerm, Protocol, Segment, Side, Term,
};
pub(crate) use protocol::rate_sample_with_side;
pub use span::{analyze_span, diagonal_part, lambda_at, rate_sample, RateSample, SpanAnalysis};

/// One dissipation pathway `γ (A ρ A† − ½{A†A, ρ})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct DissipationChannel {
    operator: CMatrix,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    operator: ComplexMatrixRepr,
    rate: f64,
}

impl TryFrom<RawChannel> for DissipationChannel {
    type Error = Error;
    fn try_from(raw: RawChannel) -> Result<Self> {
        Self::new(raw.operator.try_into()?, raw.rate)
    }
}

impl From<DissipationChannel> for RawChannel {
    fn from(ch: DissipationChannel) -> Self {
        Self { operator: ComplexMatrixRepr::from(&ch.operator), rate: ch.rate }
    }
}

impl DissipationChannel {
    pub fn new(operator: CMatrix, rate: f64) -> Result<Self> {
        if operator.nrows() != operator.ncols() {
            return Err(Error::InvalidOperator("channel operator must be square".into()));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidOperator(format!("channel rate must be positive, got {rate}")));
        }
        if !(operator.norm() > 0.0) {
            return Err(Error::InvalidOperator("channel operator is zero".into()));
        }
        Ok(Self { operator, rate })
    }

    pub fn operator(&self) -> &CMatrix {
        &self.operator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }
}

/// `L̂ρ = −i[H, ρ] + Σ_μ γ_μ (A_μ ρ A_μ† − ½{A_μ†A_μ, ρ})` at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator", into = "RawGenerator")]
pub struct LindbladGenerator {
    hamiltonian: HermitianOp,
    channels: Vec<DissipationChannel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    hamiltonian: HermitianRepr,
    #[serde(default)]
    channels: Vec<DissipationChannel>,
}

impl TryFrom<RawGenerator> for LindbladGenerator {
    type Error = Error;
    fn try_from(raw: RawGenerator) -> Result<Self> {
        Self::new(raw.hamiltonian.try_into()?, raw.channels)
    }
}

impl From<LindbladGenerator> for RawGenerator {
    fn from(g: LindbladGenerator) -> Self {
        Self { hamiltonian: HermitianRepr::from(&g.hamiltonian), channels: g.channels }
    }
}

impl LindbladGenerator {
    pub fn new(hamiltonian: HermitianOp, channels: Vec<DissipationChannel>) -> Result<Self> {
        let d = hamiltonian.dim();
        for ch in &channels {
            if ch.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: ch.dim() });
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    /// Generator with no Hamiltonian.
    pub fn dissipative(dim: usize, channels: Vec<DissipationChannel>) -> Result<Self> {
        Self::new(HermitianOp::zeros(dim), channels)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOp {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[DissipationChannel] {
        &self.channels
    }

    fn prepared(&self) -> Vec<(f64, &CMatrix, CMatrix, CMatrix)> {
        self.channels
            .iter()
            .map(|ch| {
                let a = &ch.operator;
                let a_dag = a.adjoint();
                let ada = &a_dag * a;
                (ch.rate, a, a_dag, ada)
            })
            .collect()
    }

    fn apply_prepared(
        &self,
        prepared: &[(f64, &CMatrix, CMatrix, CMatrix)],
        x: &CMatrix,
        adjoint: bool,
    ) -> CMatrix {
        let h = self.hamiltonian.matrix();
        let comm = h * x - x * h;
        // Schrödinger: −i[H, ρ]; Heisenberg: +i[H, X]
        let sign = if adjoint { 1.0 } else { -1.0 };
        let mut out = comm * c(0.0, sign);
        for (rate, a, a_dag, ada) in prepared {
            let jump = if adjoint { a_dag * x * *a } else { *a * x * a_dag };
            let anti = ada * x + x * ada;
            out += (jump - anti * c(0.5, 0.0)) * c(*rate, 0.0);
        }
        out
    }

    /// Superoperator matrix of `L̂` (or of its Hilbert–Schmidt adjoint `L̂†`).
    pub fn to_superop(&self, adjoint: bool) -> SuperOp {
        let basis = OperatorBasis::gell_mann(self.dim()).expect("generator dimension is at least 2");
        self.to_superop_with(&basis, adjoint)
    }

    pub fn to_superop_with(&self, basis: &OperatorBasis, adjoint: bool) -> SuperOp {
        let prepared = self.prepared();
        SuperOp::from_map(basis, |e| {
            HermitianOp::from_matrix_unchecked(self.apply_prepared(&prepared, e.matrix(), adjoint))
        })
    }
}

/// `L̂ρ` evaluated directly from the GKSL form.
pub fn apply_generator(gen: &LindbladGenerator, rho: &HermitianOp) -> Result<HermitianOp> {
    if rho.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: rho.dim() });
    }
    let prepared = gen.prepared();
    Ok(HermitianOp::from_matrix_unchecked(gen.apply_prepared(&prepared, rho.matrix(), false)))
}

/// `L̂†X = i[H, X] + Σ γ (A†XA − ½{A†A, X})`.
pub fn apply_adjoint_generator(gen: &LindbladGenerator, x: &HermitianOp) -> Result<HermitianOp> {
    if x.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: x.dim() });
    }
    let prepared = gen.prepared();
    Ok(HermitianOp::from_matrix_unchecked(gen.apply_prepared(&prepared, x.matrix(), true)))
}

/// Matrix of `L̂` (`adjoint = false`) or `L̂†` in the Gell-Mann basis.
pub fn to_superop(gen: &LindbladGenerator, adjoint: bool) -> SuperOp {
    gen.to_superop(adjoint)
}
