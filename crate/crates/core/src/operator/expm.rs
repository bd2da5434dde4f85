//! Matrix exponential by scaling and squaring with a truncated Taylor series.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Largest accepted `‖scale·M‖₁`.
pub const MAX_EXP_NORM: f64 = 1e4;
const SCALED_NORM_TARGET: f64 = 0.5;
const TAYLOR_TOLERANCE: f64 = 1e-16;
const TAYLOR_MAX_TERMS: usize = 64;

/// Maximum absolute column sum.
pub fn one_norm<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(scale · m)`.
///
/// The argument is halved until its 1-norm is at most 0.5, the Taylor series
/// is summed until the next term is below `1e-16` relative to the partial sum,
/// and the result is squared back up.
pub fn matrix_exp<T>(m: &DMatrix<T>, scale: f64) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    let a = m * T::from_real(scale);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExpOverflow { norm: f64::NAN });
    }
    let norm = one_norm(&a);
    if !norm.is_finite() || norm > MAX_EXP_NORM {
        return Err(Error::ExpOverflow { norm });
    }
    let squarings = if norm > SCALED_NORM_TARGET {
        (norm / SCALED_NORM_TARGET).log2().ceil() as i32
    } else {
        0
    };
    let a = a * T::from_real(0.5f64.powi(squarings));

    let mut result = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    for k in 1..=TAYLOR_MAX_TERMS {
        term = (&term * &a) * T::from_real(1.0 / k as f64);
        result += &term;
        if one_norm(&term) <= TAYLOR_TOLERANCE * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}
