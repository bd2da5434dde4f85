//! Real matrix representation of linear maps on Hermitian operators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::basis::OperatorBasis;
use super::{c, eigen, random_unitary, CMatrix, Domain, HermitianOp};
use crate::error::{Error, Result};
use crate::par;

/// A linear map on operator space, stored as a real matrix in the
/// Gell-Mann basis.
///
/// With [`Domain::Full`] the matrix is `d² × d²`. With
/// [`Domain::Traceless`] it is the `(d²−1) × (d²−1)` block acting on `𝟙⊥`,
/// i.e. coordinates `1..d²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    dim: usize,
    matrix: DMatrix<f64>,
    domain: Domain,
}

impl SuperOp {
    pub fn from_matrix(dim: usize, matrix: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let n = match domain {
            Domain::Full => dim * dim,
            Domain::Traceless => dim * dim - 1,
        };
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        Ok(Self { dim, matrix, domain })
    }

    /// Tabulates `f` on the basis. `f` must be real-linear.
    pub fn from_map(basis: &OperatorBasis, f: impl Fn(&HermitianOp) -> HermitianOp) -> Self {
        let n = basis.len();
        let mut matrix = DMatrix::zeros(n, n);
        for (j, e) in basis.elements().iter().enumerate() {
            let image = f(e);
            let col = basis.coords(&image).expect("map preserves dimension");
            matrix.set_column(j, &col);
        }
        Self { dim: basis.dim(), matrix, domain: Domain::Full }
    }

    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        Self { dim, matrix: DMatrix::identity(n, n), domain: Domain::Full }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Hilbert–Schmidt adjoint. The basis is orthonormal, so this is the transpose.
    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, matrix: self.matrix.transpose(), domain: self.domain }
    }

    /// Block acting on traceless coordinates.
    pub fn traceless_block(&self) -> Self {
        match self.domain {
            Domain::Traceless => self.clone(),
            Domain::Full => {
                let n = self.matrix.nrows();
                Self {
                    dim: self.dim,
                    matrix: self.matrix.view((1, 1), (n - 1, n - 1)).into_owned(),
                    domain: Domain::Traceless,
                }
            }
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.domain != other.domain {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(Self { dim: self.dim, matrix: &self.matrix * &other.matrix, domain: self.domain })
    }

    pub fn apply(&self, x: &HermitianOp) -> Result<HermitianOp> {
        let basis = OperatorBasis::gell_mann(self.dim)?;
        self.apply_with(&basis, x)
    }

    /// Applies the map. For a traceless-domain map the identity component of
    /// `x` is dropped and the output is traceless.
    pub fn apply_with(&self, basis: &OperatorBasis, x: &HermitianOp) -> Result<HermitianOp> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.dim() });
        }
        let v = basis.coords(x)?;
        Ok(basis.reconstruct(&self.apply_coords_full(&v)))
    }

    /// Full-space coordinates in, full-space coordinates out.
    fn apply_coords_full(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.domain {
            Domain::Full => &self.matrix * v,
            Domain::Traceless => {
                let n = v.len();
                let inner = &self.matrix * v.rows(1, n - 1);
                let mut out = DVector::zeros(n);
                out.rows_mut(1, n - 1).copy_from(&inner);
                out
            }
        }
    }

    /// Applies the complex-linear extension to an arbitrary matrix.
    pub fn apply_complex(&self, basis: &OperatorBasis, m: &CMatrix) -> CMatrix {
        let v = basis.complex_coords(m);
        let n = v.len();
        let out = match self.domain {
            Domain::Full => self.matrix.map(|x| c(x, 0.0)) * v,
            Domain::Traceless => {
                let inner = self.matrix.map(|x| c(x, 0.0)) * v.rows(1, n - 1);
                let mut out = DVector::zeros(n);
                out.rows_mut(1, n - 1).copy_from(&inner);
                out
            }
        };
        basis.reconstruct_complex(&out)
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` (unnormalized, trace `d` for
    /// trace-preserving maps).
    pub fn choi_matrix(&self) -> Result<CMatrix> {
        let d = self.dim;
        let basis = OperatorBasis::gell_mann(d)?;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let image = self.apply_complex(&basis, &super::ket_bra(d, i, j));
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = image[(a, b)];
                    }
                }
            }
        }
        Ok(choi)
    }

    /// Lower estimate of the operator norm induced by the trace norm on the
    /// map's domain.
    ///
    /// The trace-norm unit ball is the convex hull of `±|u⟩⟨u|` (full space)
    /// or `(|u⟩⟨u| − |v⟩⟨v|)/2`, `u ⊥ v` (traceless), so the maximum is
    /// searched over those extreme points: `starts` Haar-random unitaries, of
    /// which the best few are refined by randomized hill climbing.
    pub fn induced_trace_norm_estimate(&self, starts: usize, seed: u64) -> Result<NormEstimate> {
        let basis = OperatorBasis::gell_mann(self.dim)?;
        let d = self.dim;
        let objective = |u: &CMatrix| -> Result<f64> {
            let x = extreme_point(u, self.domain);
            let image = self.apply_with(&basis, &x)?;
            super::trace_norm(&image)
        };
        let initial: Vec<(f64, CMatrix)> = par::try_map_range(starts.max(1), |i| {
            let mut rng = par::sample_rng(seed, i as u64);
            let u = random_unitary(d, &mut rng);
            objective(&u).map(|v| (v, u))
        })?;
        let mut ranked = initial;
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        ranked.truncate(REFINED_STARTS);
        let refined = par::try_map_range(ranked.len(), |i| {
            let mut rng = par::sample_rng(seed ^ 0x5eed_0fc0_ffee, i as u64);
            hill_climb(&ranked[i].1, ranked[i].0, &objective, &mut rng)
        })?;
        let value = refined.into_iter().fold(0.0, f64::max);
        Ok(NormEstimate { value, starts: starts.max(1), estimate: true })
    }
}

const REFINED_STARTS: usize = 8;
const HILL_CLIMB_STEPS: usize = 400;

/// Result of [`SuperOp::induced_trace_norm_estimate`]. Always a lower
/// bound on the true norm; `estimate` is set to make that explicit in reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub starts: usize,
    pub estimate: bool,
}

fn extreme_point(u: &CMatrix, domain: Domain) -> HermitianOp {
    let col0 = u.column(0);
    let p = &col0 * col0.adjoint();
    match domain {
        Domain::Full => HermitianOp::from_matrix_unchecked(p),
        Domain::Traceless => {
            let col1 = u.column(1);
            let q = &col1 * col1.adjoint();
            HermitianOp::from_matrix_unchecked((p - q) * c(0.5, 0.0))
        }
    }
}

fn hill_climb<R: Rng>(
    start: &CMatrix,
    start_value: f64,
    objective: &impl Fn(&CMatrix) -> Result<f64>,
    rng: &mut R,
) -> Result<f64> {
    let d = start.nrows();
    let mut u = start.clone();
    let mut best = start_value;
    let mut step = 0.5;
    let mut misses = 0;
    for _ in 0..HILL_CLIMB_STEPS {
        let k = HermitianOp::random(d, rng);
        let e = eigen::eigh(k.matrix())?;
        let rotation = {
            let mut scaled = e.vectors.clone();
            for (j, &lambda) in e.values.iter().enumerate() {
                let phase = c(0.0, step * lambda).exp();
                for i in 0..d {
                    scaled[(i, j)] *= phase;
                }
            }
            &scaled * e.vectors.adjoint()
        };
        let candidate = &u * rotation;
        let value = objective(&candidate)?;
        if value > best {
            best = value;
            u = candidate;
            misses = 0;
        } else {
            misses += 1;
            if misses >= 6 {
                step *= 0.5;
                misses = 0;
                if step < 1e-7 {
                    break;
                }
            }
        }
    }
    Ok(best)
}
