//! Quantum relative entropy.

use super::DensityMatrix;
use crate::error::{Error, Result};

/// Eigenvalues of `σ` below this count as outside its support.
pub const SUPPORT_EIGENVALUE_FLOOR: f64 = 1e-12;
/// Weight of `ρ` on `ker σ` above this makes the entropy infinite.
pub const SUPPORT_WEIGHT_TOLERANCE: f64 = 1e-10;

/// `S(ρ‖σ) = tr ρ (log ρ − log σ)` with `0 log 0 = 0`.
///
/// Returns `f64::INFINITY` when the support of `ρ` is not contained in the
/// support of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let r = rho.op().eig()?;
    let s = sigma.op().eig()?;
    let d = rho.dim();

    let mut entropy_term = 0.0;
    for &p in &r.values {
        if p > 0.0 {
            entropy_term += p * p.ln();
        }
    }

    // tr(ρ log σ) = Σ_j ⟨v_j|ρ|v_j⟩ log q_j
    let mut cross = 0.0;
    for (j, &q) in s.values.iter().enumerate() {
        let v = s.vectors.column(j);
        let weight = (v.adjoint() * rho.op().matrix() * v)[(0, 0)].re;
        if q < SUPPORT_EIGENVALUE_FLOOR {
            if weight > SUPPORT_WEIGHT_TOLERANCE {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * q.ln();
    }
    debug_assert_eq!(r.values.len(), d);
    Ok((entropy_term - cross).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::HermitianOp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DensityMatrix {
        DensityMatrix::new(HermitianOp::from_real_diagonal(v).unwrap()).unwrap()
    }

    #[test]
    fn self_entropy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DensityMatrix::random(3, &mut rng);
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pure_against_mixed_is_log_two() {
        let s = relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn support_violation_is_infinite() {
        let s = relative_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])).unwrap();
        assert!(s.is_infinite());
    }

    #[test]
    fn mismatched_dims() {
        assert!(relative_entropy(&diag(&[1.0, 0.0]), &DensityMatrix::maximally_mixed(3)).is_err());
    }
}
