//! Dense nonsymmetric eigenvalues: balancing, then nalgebra's Hessenberg + Schur QR.

use nalgebra::{linalg::Schur, DMatrix};
use num_complex::Complex64;

use crate::domain::alpha_f64;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Parlett-Reinsch balancing by powers of two; returns the applied diagonal D
/// (the balanced matrix is D⁻¹ M D).
pub fn balance(m: &mut DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut scale = vec![1.0; n];
    for _ in 0..MAX_SWEEPS {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
                g /= 2.0;
            }
            g = r * 2.0;
            while c >= g {
                f /= 2.0;
                c /= 4.0;
                g *= 2.0;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                scale[i] *= f;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    scale
}

/// All eigenvalues of a real square matrix, sorted by descending real part then
/// imaginary part.
pub fn eigenvalues(mut m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain("eigenvalues of a non-square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    balance(&mut m);
    let n = m.nrows();
    let schur = Schur::try_new(m, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::NoConvergence(format!("Schur iteration on a {n}×{n} matrix")))?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// Eigenvalues of the n-2 dimensional T. With `high_care`, T is first mapped to
/// α²·J by the exact similarity diag(α, ..., α^{n-2}), where J has unit entries on
/// its lower Hessenberg pattern, so no information is lost to the geometric
/// spread of T's entries.
pub fn toeplitz_eigenvalues(n: usize, d: u32, high_care: bool) -> Result<Vec<Complex64>> {
    if n < 3 {
        return Err(Error::Domain(format!("T needs n >= 3, got {n}")));
    }
    let a = alpha_f64(d)?;
    if high_care {
        let m = n - 2;
        let j = DMatrix::from_fn(m, m, |r, c| if c <= r + 1 { 1.0 } else { 0.0 });
        let scale = a * a;
        return Ok(eigenvalues(j)?.into_iter().map(|z| z * scale).collect());
    }
    eigenvalues(crate::toeplitz::ToeplitzT::new(n, d)?.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::closed_spectrum;

    #[test]
    fn balancing_is_similarity() {
        let mut m = DMatrix::from_row_slice(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e4, 0.0, 1e-4, 3.0]);
        let orig = m.clone();
        let s = balance(&mut m);
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (m[(i, j)] - orig[(i, j)] * s[j] / s[i]).abs()
                        <= 1e-12 * orig[(i, j)].abs().max(1.0)
                );
            }
        }
        assert!(m.iter().all(|v| v.abs() < 1e3));
    }

    #[test]
    fn known_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = eigenvalues(m).unwrap();
        assert!((ev[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn high_care_matches_closed_form() {
        let n = 20;
        let ev = toeplitz_eigenvalues(n, 3, true).unwrap();
        let closed = closed_spectrum(n, 3).unwrap();
        for (z, l) in ev.iter().zip(&closed.eigenvalues) {
            assert!((z.re - l).abs() < 1e-6 && z.im.abs() < 1e-6, "{z} vs {l}");
        }
    }
}
