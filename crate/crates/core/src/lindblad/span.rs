//! Algebraic conditions on the span of the Lindblad operators and the
//! dissipative rate built from its isotropic part.
//!
//! For a self-adjoint span with Hermitian orthonormal basis `F^α`, every
//! channel operator expands as `A^μ = Σ_α c_{μα} F^α` and the dissipator
//! becomes `Σ_{αβ} B_{αβ} (F^α ρ F^β − ½{F^β F^α, ρ})` with
//! `B_{αβ} = Σ_μ γ_μ c_{μα} c*_{μβ}`. With `b` the smallest eigenvalue of `B`,
//! the isotropic part `L̂_d = (b/2) Σ_α D[F^α]` is symmetric and negative
//! semidefinite; its gap on `𝟙⊥` is the rate `λ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::LindbladGenerator;
use crate::error::{Error, Result};
use crate::operator::basis::OperatorBasis;
use crate::operator::superop::SuperOp;
use crate::operator::{c, eigen, CMatrix, HermitianOp};

/// Relative singular-value threshold for every rank decision.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Spohn-condition verdicts for one generator.
#[derive(Clone, Debug)]
pub struct SpanAnalysis {
    /// Complex dimension `m` of `span{A^μ}`.
    pub span_dim: usize,
    /// HS-orthonormal Hermitian basis of the span (empty unless self-adjoint).
    pub f_basis: Vec<HermitianOp>,
    /// `c_{μα} = tr(F^α A^μ)`, `M × m`.
    pub coeffs: DMatrix<Complex64>,
    /// `B_{αβ}`, `m × m`.
    pub b_matrix: DMatrix<Complex64>,
    /// Smallest eigenvalue of `B` (0 when not self-adjoint or empty).
    pub b_min: f64,
    pub self_adjoint: bool,
    /// Dimension of the commutant of the span.
    pub commutant_dim: usize,
    pub irreducible: bool,
}

impl SpanAnalysis {
    /// Both conditions of the static relaxation theorem hold.
    pub fn spohn_conditions(&self) -> bool {
        self.self_adjoint && self.irreducible
    }
}

fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

fn numerical_rank(singular_values: &DVector<f64>) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Orthonormal columns spanning the column space of `m`.
fn column_space(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = m.clone().svd(true, false);
    let rank = numerical_rank(&svd.singular_values);
    let u = svd.u.expect("requested U");
    // nalgebra does not sort singular values; pick the significant ones
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > RANK_TOLERANCE * max).collect();
    debug_assert_eq!(keep.len(), rank);
    DMatrix::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Gram–Schmidt over `{(A+A†)/2, (A−A†)/2i}` in channel order, in real
/// Gell-Mann coordinates.
fn hermitian_span_basis(basis: &OperatorBasis, gen: &LindbladGenerator) -> Vec<HermitianOp> {
    let mut candidates = Vec::with_capacity(2 * gen.channels().len());
    for ch in gen.channels() {
        let a = ch.operator();
        let a_dag = a.adjoint();
        let re = (a + &a_dag) * c(0.5, 0.0);
        let im = (a - &a_dag) * c(0.0, -0.5);
        for part in [re, im] {
            let h = HermitianOp::from_matrix_unchecked(part);
            candidates.push(basis.coords(&h).expect("same dimension"));
        }
    }
    let scale = candidates.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for mut v in candidates {
        for _ in 0..2 {
            for q in &accepted {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > RANK_TOLERANCE * scale {
            accepted.push(v / norm);
        }
    }
    accepted.iter().map(|v| basis.reconstruct(v)).collect()
}

/// Kernel dimension of `Y ↦ (i[F¹, Y], …, i[F^m, Y])` on Hermitian operators.
fn hermitian_commutant_dim(basis: &OperatorBasis, f_basis: &[HermitianOp]) -> usize {
    let n = basis.len();
    if f_basis.is_empty() {
        return n;
    }
    let mut k = DMatrix::<f64>::zeros(f_basis.len() * n, n);
    for (j, e) in basis.elements().iter().enumerate() {
        for (alpha, f) in f_basis.iter().enumerate() {
            let v = basis.coords(&f.i_commutator(e)).expect("same dimension");
            k.view_mut((alpha * n, j), (n, 1)).copy_from(&v);
        }
    }
    let sv = k.singular_values();
    n - numerical_rank(&sv)
}

/// Complex kernel dimension of `Y ↦ ([A^μ, Y])_μ` on all `d × d` matrices.
fn complex_commutant_dim(gen: &LindbladGenerator) -> usize {
    let d = gen.dim();
    let n = d * d;
    let chans = gen.channels();
    let mut k = DMatrix::<Complex64>::zeros(chans.len() * n, n);
    let id = CMatrix::identity(d, d);
    for (mu, ch) in chans.iter().enumerate() {
        // vec(AY − YA) = (I ⊗ A − Aᵀ ⊗ I) vec(Y), column-major
        let block = id.kronecker(ch.operator()) - ch.operator().transpose().kronecker(&id);
        k.view_mut((mu * n, 0), (n, n)).copy_from(&block);
    }
    let sv = k.singular_values();
    n - numerical_rank(&sv)
}

/// Decides self-adjointness and irreducibility of `span{A^μ}` and builds the
/// `F^α`, `c`, `B`, `b` data.
pub fn analyze_span(gen: &LindbladGenerator) -> SpanAnalysis {
    let d = gen.dim();
    let basis = OperatorBasis::gell_mann(d).expect("generator dimension is at least 2");
    analyze_span_with(&basis, gen)
}

pub(crate) fn analyze_span_with(basis: &OperatorBasis, gen: &LindbladGenerator) -> SpanAnalysis {
    let d = gen.dim();
    let channels = gen.channels();
    if channels.is_empty() {
        return SpanAnalysis {
            span_dim: 0,
            f_basis: Vec::new(),
            coeffs: DMatrix::zeros(0, 0),
            b_matrix: DMatrix::zeros(0, 0),
            b_min: 0.0,
            self_adjoint: true,
            commutant_dim: d * d,
            irreducible: false,
        };
    }

    let stacked = DMatrix::from_columns(&channels.iter().map(|ch| vectorize(ch.operator())).collect::<Vec<_>>());
    let q = column_space(&stacked);
    let span_dim = q.ncols();

    let self_adjoint = channels.iter().all(|ch| {
        let target = vectorize(&ch.operator().adjoint());
        let projected = &q * (q.adjoint() * &target);
        (target - projected).norm() <= RANK_TOLERANCE * ch.operator().norm()
    });

    if !self_adjoint {
        let commutant_dim = complex_commutant_dim(gen);
        return SpanAnalysis {
            span_dim,
            f_basis: Vec::new(),
            coeffs: DMatrix::zeros(0, 0),
            b_matrix: DMatrix::zeros(0, 0),
            b_min: 0.0,
            self_adjoint,
            commutant_dim,
            irreducible: commutant_dim == 1,
        };
    }

    let f_basis = hermitian_span_basis(basis, gen);
    if f_basis.len() != span_dim {
        log::warn!(
            "hermitian basis has {} elements but the complex span has dimension {span_dim}",
            f_basis.len()
        );
    }
    let m = f_basis.len();
    let coeffs = DMatrix::from_fn(channels.len(), m, |mu, alpha| {
        (f_basis[alpha].matrix() * channels[mu].operator()).trace()
    });
    let mut b_matrix = DMatrix::<Complex64>::zeros(m, m);
    for (mu, ch) in channels.iter().enumerate() {
        for alpha in 0..m {
            for beta in 0..m {
                b_matrix[(alpha, beta)] += coeffs[(mu, alpha)] * coeffs[(mu, beta)].conj() * ch.rate();
            }
        }
    }
    let b_min = if m == 0 {
        0.0
    } else {
        eigen::eigh(&b_matrix).map(|e| e.values[0]).unwrap_or(0.0)
    };
    let commutant_dim = hermitian_commutant_dim(basis, &f_basis);
    SpanAnalysis {
        span_dim,
        f_basis,
        coeffs,
        b_matrix,
        b_min,
        self_adjoint,
        commutant_dim,
        irreducible: commutant_dim == 1,
    }
}

/// `L̂_d ρ = (b/2) Σ_α (F^α ρ F^α − ½ F^αF^α ρ − ½ ρ F^αF^α)`.
pub fn diagonal_part(gen: &LindbladGenerator, analysis: &SpanAnalysis) -> Result<SuperOp> {
    let basis = OperatorBasis::gell_mann(gen.dim())?;
    diagonal_part_with(&basis, analysis)
}

fn diagonal_part_with(basis: &OperatorBasis, analysis: &SpanAnalysis) -> Result<SuperOp> {
    if !analysis.self_adjoint || !(analysis.b_min > 0.0) {
        return Err(Error::Precondition(
            "diagonal part needs a self-adjoint span with b > 0".into(),
        ));
    }
    let half_b = 0.5 * analysis.b_min;
    let squares: Vec<CMatrix> = analysis.f_basis.iter().map(|f| f.matrix() * f.matrix()).collect();
    Ok(SuperOp::from_map(basis, |rho| {
        let r = rho.matrix();
        let mut out = CMatrix::zeros(r.nrows(), r.ncols());
        for (f, f2) in analysis.f_basis.iter().zip(&squares) {
            let fm = f.matrix();
            out += fm * r * fm - (f2 * r + r * f2) * c(0.5, 0.0);
        }
        HermitianOp::from_matrix_unchecked(out * c(half_b, 0.0))
    }))
}

/// Rate and verdicts at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSample {
    pub t: f64,
    pub lambda: f64,
    pub span_dim: usize,
    pub self_adjoint: bool,
    pub irreducible: bool,
}

impl RateSample {
    pub fn spohn_conditions(&self) -> bool {
        self.self_adjoint && self.irreducible
    }
}

/// `λ` and the span verdicts for a generator, reported at time `t`.
pub fn rate_sample(gen: &LindbladGenerator, t: f64) -> Result<RateSample> {
    let basis = OperatorBasis::gell_mann(gen.dim())?;
    rate_sample_with(&basis, gen, t)
}

pub(crate) fn rate_sample_with(basis: &OperatorBasis, gen: &LindbladGenerator, t: f64) -> Result<RateSample> {
    let analysis = analyze_span_with(basis, gen);
    let lambda = lambda_from_analysis(basis, &analysis)?;
    if (lambda > 0.0) != analysis.irreducible && analysis.self_adjoint && analysis.span_dim > 0 {
        log::warn!(
            "rate {lambda:e} disagrees with irreducibility verdict {} at t = {t}",
            analysis.irreducible
        );
    }
    Ok(RateSample {
        t,
        lambda,
        span_dim: analysis.span_dim,
        self_adjoint: analysis.self_adjoint,
        irreducible: analysis.irreducible,
    })
}

fn lambda_from_analysis(basis: &OperatorBasis, analysis: &SpanAnalysis) -> Result<f64> {
    if !analysis.self_adjoint || analysis.span_dim == 0 || !(analysis.b_min > 0.0) {
        return Ok(0.0);
    }
    let ld = diagonal_part_with(basis, analysis)?;
    let block = ld.traceless_block();
    let values = eigen::eigvalsh_real(block.matrix())?;
    let largest = values[values.len() - 1];
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let lambda = -largest;
    if lambda <= RANK_TOLERANCE * scale {
        return Ok(0.0);
    }
    Ok(lambda)
}

/// Dissipative rate `λ ≥ 0`: minus the largest eigenvalue of `L̂_d` on
/// traceless operators, or 0 when the span is not self-adjoint.
pub fn lambda_at(gen: &LindbladGenerator) -> Result<f64> {
    Ok(rate_sample(gen, 0.0)?.lambda)
}
