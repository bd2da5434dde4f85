//! Dense algebra on the real vector space of Hermitian operators: states,
//! inner products, norms, bases and superoperators.

pub mod basis;
pub mod eigen;
pub mod entropy;
pub mod expm;
pub mod superop;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use eigen::HermitianEigen;

pub type CMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const STATE_TRACE_TOLERANCE: f64 = 1e-10;
pub const STATE_POSITIVITY_TOLERANCE: f64 = 1e-10;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Which part of operator space a norm or superoperator lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// All Hermitian operators.
    Full,
    /// Traceless Hermitian operators, the orthogonal complement of 𝟙.
    Traceless,
}

/// A self-adjoint operator on a `d`-dimensional Hilbert space, `d ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    mat: CMatrix,
}

impl HermitianOp {
    /// Validates Hermiticity (per entry, within `1e-12`) and symmetrizes.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let d = mat.nrows();
        if mat.ncols() != d {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, expected square",
                d,
                mat.ncols()
            )));
        }
        if d < 2 {
            return Err(Error::InvalidOperator("dimension must be at least 2".into()));
        }
        for i in 0..d {
            for j in 0..d {
                let z = mat[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::InvalidOperator("non-finite entry".into()));
                }
                if (z - mat[(j, i)].conj()).norm() > HERMITICITY_TOLERANCE {
                    return Err(Error::InvalidOperator(format!(
                        "entry ({i},{j}) breaks Hermiticity"
                    )));
                }
            }
        }
        Ok(Self::from_matrix_unchecked(mat))
    }

    /// Takes the Hermitian part of `mat` without validation.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        let herm = (&mat + mat.adjoint()) * c(0.5, 0.0);
        Self { mat: herm }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&v))
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim, dim) }
    }

    /// `|k⟩⟨k|`
    pub fn projector(dim: usize, k: usize) -> Self {
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(k, k)] = c(1.0, 0.0);
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn eig(&self) -> Result<HermitianEigen> {
        eigen::eigh(&self.mat)
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `i[A, B]`, which is Hermitian for Hermitian `A`, `B`.
    pub fn i_commutator(&self, other: &Self) -> Self {
        let comm = &self.mat * &other.mat - &other.mat * &self.mat;
        Self::from_matrix_unchecked(comm * c(0.0, 1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: &self.mat * c(s, 0.0) }
    }

    /// Traceless part `X − (tr X / d) 𝟙`.
    pub fn traceless_part(&self) -> Self {
        let d = self.dim();
        let shift = self.trace() / d as f64;
        self - &Self::identity(d).scale(shift)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Random Hermitian matrix with independent Gaussian entries.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self::from_matrix_unchecked(gaussian_matrix(dim, rng))
    }

    /// Random traceless Hermitian matrix.
    pub fn random_traceless<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self::random(dim, rng).traceless_part()
    }
}

impl Add for &HermitianOp {
    type Output = HermitianOp;
    fn add(self, rhs: Self) -> HermitianOp {
        HermitianOp { mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &HermitianOp {
    type Output = HermitianOp;
    fn sub(self, rhs: Self) -> HermitianOp {
        HermitianOp { mat: &self.mat - &rhs.mat }
    }
}

impl Neg for &HermitianOp {
    type Output = HermitianOp;
    fn neg(self) -> HermitianOp {
        HermitianOp { mat: -&self.mat }
    }
}

impl Mul<f64> for &HermitianOp {
    type Output = HermitianOp;
    fn mul(self, rhs: f64) -> HermitianOp {
        self.scale(rhs)
    }
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(dim, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar
    let mut out = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// A positive, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    pub fn new(op: HermitianOp) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > STATE_TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = op.eig()?.values[0];
        if min < -STATE_POSITIVITY_TOLERANCE {
            return Err(Error::InvalidState(format!("smallest eigenvalue is {min:e}")));
        }
        Ok(Self { op })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOp::identity(dim).scale(1.0 / dim as f64) }
    }

    /// The basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self { op: HermitianOp::projector(dim, k) }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / c(norm, 0.0);
        Self::new(HermitianOp::new(&psi * psi.adjoint())?)
    }

    /// Full-rank random state `G G† / tr(G G†)` from a Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = gaussian_matrix(dim, rng);
        let gg = &g * g.adjoint();
        let tr = gg.trace().re;
        Self { op: HermitianOp::from_matrix_unchecked(gg / c(tr, 0.0)) }
    }

    /// Random pure state.
    pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let psi = DVector::from_fn(dim, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c(re, im)
        });
        let psi = &psi / c(psi.norm(), 0.0);
        Self { op: HermitianOp::from_matrix_unchecked(&psi * psi.adjoint()) }
    }

    /// Accepts operators whose smallest eigenvalue is within `tolerance` of
    /// zero by clipping negative eigenvalues and renormalizing.
    pub fn clip(op: &HermitianOp, tolerance: f64) -> Result<Self> {
        let e = op.eig()?;
        if e.values[0] < -tolerance {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {:e} below -{tolerance:e}",
                e.values[0]
            )));
        }
        let clipped = e.map_values(|x| x.max(0.0));
        let tr = clipped.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState("operator has no positive part".into()));
        }
        Ok(Self { op: HermitianOp::from_matrix_unchecked(clipped / c(tr, 0.0)) })
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn into_op(self) -> HermitianOp {
        self.op
    }
}

/// Hilbert–Schmidt inner product `tr(XY)`.
pub fn hs_inner(x: &HermitianOp, y: &HermitianOp) -> Result<f64> {
    x.check_dim(y)?;
    let d = x.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (x.mat[(i, j)] * y.mat[(j, i)]).re;
        }
    }
    Ok(acc)
}

/// `‖X‖₁ = Σ|λ|`.
pub fn trace_norm(x: &HermitianOp) -> Result<f64> {
    Ok(x.eig()?.values.iter().map(|l| l.abs()).sum())
}

/// `½‖ρ − σ‖₁`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.op.check_dim(&sigma.op)?;
    Ok(0.5 * trace_norm(&(&rho.op - &sigma.op))?)
}

/// Dual of the trace norm on the chosen subspace:
/// `max{ |⟨Y, X⟩| : ‖Y‖₁ = 1, Y ∈ subspace }`.
///
/// On the full space this is the spectral norm. On traceless operators the
/// extreme points of the trace-norm ball are `(|u⟩⟨u| − |v⟩⟨v|)/2` with
/// `u ⊥ v`, which gives the half-spread `(λ_max − λ_min)/2`.
pub fn subspace_inf_norm(x: &HermitianOp, subspace: Domain) -> Result<f64> {
    let values = x.eig()?.values;
    let lo = values[0];
    let hi = values[values.len() - 1];
    match subspace {
        Domain::Full => Ok(lo.abs().max(hi.abs())),
        Domain::Traceless => {
            let tr = x.trace();
            if tr.abs() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "traceless norm requested for operator with trace {tr:e}"
                )));
            }
            Ok(0.5 * (hi - lo))
        }
    }
}

/// Standard qubit operators. `σ⁻ = |0⟩⟨1|` lowers `|1⟩` to `|0⟩`.
pub mod pauli {
    use super::{c, CMatrix, HermitianOp};

    pub fn x() -> HermitianOp {
        HermitianOp::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
    }

    pub fn y() -> HermitianOp {
        HermitianOp::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
    }

    pub fn z() -> HermitianOp {
        HermitianOp::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ))
    }

    pub fn lowering() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
    }

    pub fn raising() -> CMatrix {
        lowering().adjoint()
    }
}

/// Matrix unit `|i⟩⟨j|`.
pub fn ket_bra(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = c(1.0, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hs_inner_of_paulis() {
        assert_eq!(hs_inner(&pauli::x(), &pauli::y()).unwrap(), 0.0);
        assert_eq!(hs_inner(&pauli::x(), &pauli::x()).unwrap(), 2.0);
        let e0 = HermitianOp::identity(2).scale(1.0 / 2f64.sqrt());
        assert!((hs_inner(&e0, &e0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hs_inner_rejects_mismatch() {
        let r = hs_inner(&HermitianOp::identity(2), &HermitianOp::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_operators() {
        assert!(HermitianOp::new(pauli::lowering()).is_err());
        assert!(HermitianOp::new(CMatrix::identity(1, 1)).is_err());
        assert!(HermitianOp::new(CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectra_of_paulis() {
        for p in [pauli::x(), pauli::z()] {
            let v = p.eig().unwrap().values;
            assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&pauli::z()).unwrap() - 2.0).abs() < 1e-14);
        let d = HermitianOp::from_real_diagonal(&[3.0, -1.0]).unwrap();
        assert!((trace_norm(&d).unwrap() - 4.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DensityMatrix::random(4, &mut rng);
        assert!((trace_norm(rho.op()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inf_norm_examples() {
        assert!((subspace_inf_norm(&pauli::z(), Domain::Traceless).unwrap() - 1.0).abs() < 1e-14);
        let d = HermitianOp::from_real_diagonal(&[3.0, -1.0]).unwrap();
        assert!((subspace_inf_norm(&d, Domain::Full).unwrap() - 3.0).abs() < 1e-14);
        assert!(subspace_inf_norm(&d, Domain::Traceless).is_err());
        assert_eq!(subspace_inf_norm(&HermitianOp::zeros(3), Domain::Traceless).unwrap(), 0.0);
        assert_eq!(subspace_inf_norm(&HermitianOp::zeros(3), Domain::Full).unwrap(), 0.0);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = HermitianOp::from_real_diagonal(&[1.5, -0.5]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        let half = HermitianOp::from_real_diagonal(&[0.5, 0.4]).unwrap();
        assert!(DensityMatrix::new(half).is_err());
        let near = HermitianOp::from_real_diagonal(&[1.0 + 1e-11, -1e-11]).unwrap();
        let clipped = DensityMatrix::clip(&near, 1e-9).unwrap();
        assert!(clipped.op().eig().unwrap().values[0] >= 0.0);
    }

    #[test]
    fn random_states_are_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..6 {
            let rho = DensityMatrix::random(d, &mut rng);
            let e = rho.op().eig().unwrap();
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(DensityMatrix::new(rho.op().clone()).is_ok());
            let psi = DensityMatrix::random_pure(d, &mut rng);
            assert!(DensityMatrix::new(psi.op().clone()).is_ok());
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(4, &mut rng);
        assert!((u.adjoint() * &u - CMatrix::identity(4, 4)).norm() < 1e-12);
    }
}
