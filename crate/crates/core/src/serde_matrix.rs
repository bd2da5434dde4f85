//! JSON shapes for matrices: row-major lists of rows, each entry an
//! `[re, im]` pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c, CMatrix, HermitianOp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexMatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for ComplexMatrixRepr {
    fn from(m: &CMatrix) -> Self {
        Self(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<ComplexMatrixRepr> for CMatrix {
    type Error = Error;
    fn try_from(repr: ComplexMatrixRepr) -> Result<Self> {
        let rows = repr.0.len();
        if rows == 0 {
            return Err(Error::InvalidOperator("empty matrix".into()));
        }
        for (i, row) in repr.0.iter().enumerate() {
            if row.len() != rows {
                return Err(Error::InvalidOperator(format!(
                    "row {i} has {} entries, expected {rows} (matrices must be square)",
                    row.len()
                )));
            }
        }
        Ok(CMatrix::from_fn(rows, rows, |i, j| {
            let [re, im] = repr.0[i][j];
            c(re, im)
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HermitianRepr(pub ComplexMatrixRepr);

impl From<&HermitianOp> for HermitianRepr {
    fn from(h: &HermitianOp) -> Self {
        Self(ComplexMatrixRepr::from(h.matrix()))
    }
}

impl TryFrom<HermitianRepr> for HermitianOp {
    type Error = Error;
    fn try_from(repr: HermitianRepr) -> Result<Self> {
        HermitianOp::new(repr.0.try_into()?)
    }
}
