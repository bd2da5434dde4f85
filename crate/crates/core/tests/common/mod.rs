//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use lindcycle::operator::basis::OperatorBasis;
use lindcycle::operator::{random_unitary, CMatrix, HermitianOp};
use lindcycle::SuperOp;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `max ⟨Y, X⟩ / ‖Y‖₁` over traceless Hermitian `Y`, by ascent from
/// `restarts` random starts. Searches `Y = aa† − bb†` with unit vectors `a`,
/// `b` (always traceless), taking projected gradient steps on the two spheres.
/// The trace norm of each candidate is measured with nalgebra's eigensolver,
/// and the spectrum of `X` is never used.
pub fn traceless_inf_norm_oracle<R: Rng>(x: &HermitianOp, restarts: usize, rng: &mut R) -> f64 {
    let d = x.dim();
    let xm = x.matrix();
    let eta = 1.0 / xm.norm().max(1e-300);
    let unit = |v: CMatrix| {
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    };
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let mut a = unit(gaussian(d, 1, rng));
        let mut b = unit(gaussian(d, 1, rng));
        for _ in 0..400 {
            // ∂/∂a† of a†Xa is Xa; the sphere constraint is restored by rescaling
            let ga = xm * &a;
            let gb = xm * &b;
            a = unit(&a + ga * Complex64::new(eta, 0.0));
            b = unit(&b - gb * Complex64::new(eta, 0.0));
        }
        let y = &a * a.adjoint() - &b * b.adjoint();
        let trace_norm: f64 = y.clone().symmetric_eigenvalues().iter().map(|l| l.abs()).sum();
        if trace_norm < 1e-12 {
            continue;
        }
        let inner = (y * xm).trace().re;
        best = best.max(inner.abs() / trace_norm);
    }
    best
}

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Random CPTP map with `kraus` Kraus operators, from a Haar isometry.
pub fn random_channel<R: Rng>(d: usize, kraus: usize, rng: &mut R) -> SuperOp {
    let u = random_unitary(d * kraus, rng);
    let ks: Vec<CMatrix> = (0..kraus).map(|k| u.view((k * d, 0), (d, d)).into_owned()).collect();
    let basis = OperatorBasis::gell_mann(d).unwrap();
    SuperOp::from_map(&basis, |x| {
        let mut out = CMatrix::zeros(d, d);
        for k in &ks {
            out += k * x.matrix() * k.adjoint();
        }
        HermitianOp::new((&out + out.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
    })
}

pub fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
