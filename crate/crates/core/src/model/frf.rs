use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::GreyBoxModel;
use crate::error::{Error, Result};

/// Discrete-time frequency variable `exp(i 2 pi k / N)`.
pub fn xi(line: usize, period_length: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * line as f64 / period_length as f64)
}

pub(crate) fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Solves `(z I - A) X = rhs`; `line` is only used for error reporting.
pub fn resolvent(
    a: &DMatrix<f64>,
    z: Complex64,
    rhs: &DMatrix<Complex64>,
    line: usize,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut m = DMatrix::<Complex64>::from_diagonal_element(n, n, z);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] -= a[(i, j)];
        }
    }
    let scale = m.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if n > 0 && min_pivot <= 1e-13 * scale {
        return Err(Error::SingularAtLine { line });
    }
    let x = lu.solve(rhs).ok_or(Error::SingularAtLine { line })?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularAtLine { line });
    }
    Ok(x)
}

/// `H_e(k) = C (xi_k I - A)^-1 Bbar + Dbar`, one `l x (m+s)` matrix per line.
pub fn extended_frf(
    model: &GreyBoxModel,
    lines: &[usize],
    period_length: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    if period_length == 0 {
        return Err(Error::InvalidArgument("period length must be positive".into()));
    }
    let bbar = complexify(model.bbar());
    let c = complexify(model.c());
    let dbar = complexify(model.dbar());
    lines
        .iter()
        .map(|&k| {
            let x = resolvent(model.a(), xi(k, period_length), &bbar, k)?;
            Ok(&c * x + &dbar)
        })
        .collect()
}
