//! Orthonormal Hermitian basis of operator space with `𝟙/√d` first.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{c, CMatrix, HermitianOp};
use crate::error::{Error, Result};

/// Generalized Gell-Mann basis: `𝟙/√d`, then for each pair `j < k` the
/// symmetric and antisymmetric off-diagonal elements, then the traceless
/// diagonal elements. Every element has unit Hilbert–Schmidt norm.
///
/// For `d = 2` this is `{𝟙, σx, σy, σz}/√2`.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<HermitianOp>,
}

impl OperatorBasis {
    pub fn gell_mann(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidOperator("dimension must be at least 2".into()));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = Vec::with_capacity(dim * dim);
        elements.push(HermitianOp::identity(dim).scale(1.0 / (dim as f64).sqrt()));
        for j in 0..dim {
            for k in j + 1..dim {
                let mut sym = CMatrix::zeros(dim, dim);
                sym[(j, k)] = c(inv_sqrt2, 0.0);
                sym[(k, j)] = c(inv_sqrt2, 0.0);
                elements.push(HermitianOp::from_matrix_unchecked(sym));
                let mut anti = CMatrix::zeros(dim, dim);
                anti[(j, k)] = c(0.0, -inv_sqrt2);
                anti[(k, j)] = c(0.0, inv_sqrt2);
                elements.push(HermitianOp::from_matrix_unchecked(anti));
            }
        }
        for l in 1..dim {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut diag = CMatrix::zeros(dim, dim);
            for m in 0..l {
                diag[(m, m)] = c(norm, 0.0);
            }
            diag[(l, l)] = c(-(l as f64) * norm, 0.0);
            elements.push(HermitianOp::from_matrix_unchecked(diag));
        }
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, `d²`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    /// Real coordinates `tr(E_i X)`.
    pub fn coords(&self, x: &HermitianOp) -> Result<DVector<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.dim() });
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.complex_coords(x.matrix()).iter().map(|z| z.re),
        ))
    }

    /// Complex coordinates `tr(E_i M)` of an arbitrary matrix.
    pub fn complex_coords(&self, m: &CMatrix) -> DVector<Complex64> {
        let d = self.dim;
        DVector::from_iterator(
            self.len(),
            self.elements.iter().map(|e| {
                let em = e.matrix();
                let mut acc = c(0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        let w = em[(i, j)];
                        if w.re != 0.0 || w.im != 0.0 {
                            acc += w * m[(j, i)];
                        }
                    }
                }
                acc
            }),
        )
    }

    /// `Σ v_i E_i`
    pub fn reconstruct(&self, v: &DVector<f64>) -> HermitianOp {
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        for (e, &w) in self.elements.iter().zip(v.iter()) {
            if w != 0.0 {
                m += e.matrix() * c(w, 0.0);
            }
        }
        HermitianOp::from_matrix_unchecked(m)
    }

    /// `Σ v_i E_i` for complex coefficients (a general matrix).
    pub fn reconstruct_complex(&self, v: &DVector<Complex64>) -> CMatrix {
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        for (e, &w) in self.elements.iter().zip(v.iter()) {
            m += e.matrix() * w;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{hs_inner, pauli};

    #[test]
    fn orthonormal_with_identity_first() {
        for d in 2..=5 {
            let basis = OperatorBasis::gell_mann(d).unwrap();
            assert_eq!(basis.len(), d * d);
            let e0 = &basis.elements()[0];
            let expected = HermitianOp::identity(d).scale(1.0 / (d as f64).sqrt());
            assert!(e0.max_abs_diff(&expected) < 1e-15);
            for (i, a) in basis.elements().iter().enumerate() {
                for (j, b) in basis.elements().iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((hs_inner(a, b).unwrap() - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qubit_basis_is_pauli() {
        let basis = OperatorBasis::gell_mann(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(basis.elements()[1].max_abs_diff(&pauli::x().scale(s)) < 1e-15);
        assert!(basis.elements()[2].max_abs_diff(&pauli::y().scale(s)) < 1e-15);
        assert!(basis.elements()[3].max_abs_diff(&pauli::z().scale(s)) < 1e-15);
    }

    #[test]
    fn coords_round_trip() {
        let basis = OperatorBasis::gell_mann(3).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let x = HermitianOp::random(3, &mut rng);
        let back = basis.reconstruct(&basis.coords(&x).unwrap());
        assert!(back.max_abs_diff(&x) < 1e-13);
        let m = crate::operator::gaussian_matrix(3, &mut rng);
        let back = basis.reconstruct_complex(&basis.complex_coords(&m));
        assert!((back - m).norm() < 1e-13);
    }
}
