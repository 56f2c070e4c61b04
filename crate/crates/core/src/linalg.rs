//! Dense complex eigenvalues and polynomial roots.

use nalgebra::DMatrix;

use crate::eigen::sort_re_im;
use crate::{Error, Result, C64};

/// Eigenvalues of a dense complex matrix via the complex Schur form,
/// returned in `(Re, Im)` order.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Contract(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_re_im(&mut ev);
    Ok(ev)
}

/// Roots of `Σ c_i λ^i` (coefficients in ascending order) from the
/// companion matrix. Trailing zero coefficients are rejected.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<C64>> {
    let Some(&lead) = coeffs.last() else {
        return Err(Error::InvalidParameter("empty polynomial".into()));
    };
    if lead == 0.0 {
        return Err(Error::InvalidParameter(
            "leading polynomial coefficient is zero".into(),
        ));
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        c[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        c[(i, n - 1)] = C64::new(-coeffs[i] / lead, 0.0);
    }
    let mut roots = eigenvalues(&c)?;
    // Newton polish against the original coefficients.
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for &a in coeffs.iter().rev() {
                dp = dp * *r + p;
                p = p * *r + a;
            }
            if dp.norm() == 0.0 {
                break;
            }
            *r -= p / dp;
        }
    }
    sort_re_im(&mut roots);
    Ok(roots)
}
