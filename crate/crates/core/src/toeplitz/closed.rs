//! Closed-form spectrum of T, with exact checks of its characteristic polynomial.

use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};
use serde::Serialize;

use super::ToeplitzT;
use crate::dd::{self, DD};
use crate::domain::{alpha, alpha_f64, check_dimension, require_even, Rational};
use crate::error::{Error, Result};
use crate::exact::RationalMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedSpectrum {
    pub n: usize,
    pub d: u32,
    /// φ_j = jπ/n for j = 1..n/2-1.
    pub angles: Vec<f64>,
    /// λ̃_j = 4α²cos²φ_j, strictly decreasing in j.
    pub eigenvalues: Vec<f64>,
    pub zero_algebraic: usize,
    pub zero_geometric: usize,
}

fn check_closed(n: usize, d: u32) -> Result<()> {
    check_dimension(d)?;
    require_even(n)?;
    if n < 4 {
        return Err(Error::Domain(format!(
            "closed spectrum needs n >= 4, got {n}"
        )));
    }
    Ok(())
}

pub fn closed_spectrum(n: usize, d: u32) -> Result<ClosedSpectrum> {
    check_closed(n, d)?;
    let a = alpha_f64(d)?;
    let m = n / 2 - 1;
    let angles: Vec<f64> = (1..=m)
        .map(|j| j as f64 * std::f64::consts::PI / n as f64)
        .collect();
    let eigenvalues = angles
        .iter()
        .map(|p| 4.0 * a * a * p.cos() * p.cos())
        .collect();
    Ok(ClosedSpectrum {
        n,
        d,
        angles,
        eigenvalues,
        zero_algebraic: m,
        zero_geometric: 1,
    })
}

/// Unnormalized right and left eigenvectors of T for λ̃_j, components k = 1..n-2.
pub fn closed_eigenvectors(n: usize, d: u32, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_closed(n, d)?;
    if j == 0 || j > n / 2 - 1 {
        return Err(Error::OutOfRange {
            what: "j",
            value: j as i64,
            lo: 1,
            hi: (n / 2 - 1) as i64,
        });
    }
    let a = alpha_f64(d)?;
    let phi = j as f64 * std::f64::consts::PI / n as f64;
    let g = 2.0 * a * phi.cos();
    let s = phi.sin();
    let right = (1..=n - 2)
        .map(|k| g.powi(k as i32 - 2) * ((k + 1) as f64 * phi).sin() / s)
        .collect();
    let left = (1..=n - 2)
        .map(|k| g.powi(n as i32 - 3 - k as i32) * ((n - k) as f64 * phi).sin() / s)
        .collect();
    Ok((right, left))
}

/// Angle between two vectors as lines, accurate for nearly parallel inputs.
pub fn eigenvector_angle(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (x, y) = (a / nu, sign * b / nv);
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Largest eigenvalue of T, 4α²cos²(π/n).
pub fn lambda2(n: usize, d: u32) -> Result<f64> {
    check_closed(n, d)?;
    let a = alpha_f64(d)?;
    let c = (std::f64::consts::PI / n as f64).cos();
    Ok(4.0 * a * a * c * c)
}

/// 4α² = 4d²/(d²+1)².
pub fn lambda2_tdl(d: u32) -> Result<Rational> {
    let a = alpha(d)?;
    Ok(Rational::from_integer(4.into()) * &a * &a)
}

/// R⁻¹TR with R = diag(α, ..., α^{n-2}); every nonzero entry must equal α².
pub fn similarity_normalize(n: usize, d: u32) -> Result<RationalMatrix> {
    let t = ToeplitzT::new(n, d)?;
    let m = t.size();
    let a = t.alpha.clone();
    let tm = t.to_rational();
    let out = RationalMatrix::from_fn(m, m, |i, j| {
        // (R⁻¹TR)_{ij} = α^{j-i} T_{ij}
        let e = j as i64 - i as i64;
        let scale: Rational = if e >= 0 {
            Pow::pow(&a, e as u64)
        } else {
            Pow::pow(&a.recip(), (-e) as u64)
        };
        tm.get(i, j) * scale
    });
    let a2 = &a * &a;
    for i in 0..m {
        for j in 0..m {
            let v = out.get(i, j);
            let expected_nonzero = j <= i + 1;
            if expected_nonzero && *v != a2 || !expected_nonzero && !v.is_zero() {
                return Err(Error::Verification(format!(
                    "normalized entry ({i},{j}) = {v}, expected {}",
                    if expected_nonzero {
                        a2.to_string()
                    } else {
                        "0".into()
                    }
                )));
            }
        }
    }
    Ok(out)
}

/// Exact ranks of T^p for p = 0..=p_max.
pub fn toeplitz_power_ranks(n: usize, d: u32, p_max: usize) -> Result<Vec<usize>> {
    if n > 66 {
        return Err(Error::Capacity(format!(
            "exact ranks of T^p limited to n <= 66, got {n}"
        )));
    }
    let t = ToeplitzT::new(n, d)?.to_rational();
    let mut acc = RationalMatrix::identity(t.rows());
    let mut out = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        if p > 0 {
            acc = acc.mul(&t);
        }
        out.push(acc.rank());
    }
    Ok(out)
}

/// Brick-wall map on even cuts: α²·tridiag(1, 2, 1) of size n/2 - 1.
pub fn brickwall_matrix(n: usize, d: u32) -> Result<RationalMatrix> {
    check_closed(n, d)?;
    let a = alpha(d)?;
    let a2 = &a * &a;
    let m = n / 2 - 1;
    Ok(RationalMatrix::from_fn(m, m, |i, j| {
        if i == j {
            &a2 * Rational::from_integer(2.into())
        } else if i.abs_diff(j) == 1 {
            a2.clone()
        } else {
            Rational::zero()
        }
    }))
}

type Poly = Vec<Rational>;

fn poly_mul_linear(p: &Poly, c0: &Rational) -> Poly {
    // p(x)·(x + c0)
    let mut out = vec![Rational::zero(); p.len() + 1];
    for (i, v) in p.iter().enumerate() {
        out[i + 1] += v;
        out[i] += v * c0;
    }
    out
}

fn poly_axpy(acc: &mut Poly, s: &Rational, p: &Poly) {
    if acc.len() < p.len() {
        acc.resize(p.len(), Rational::zero());
    }
    for (a, v) in acc.iter_mut().zip(p) {
        *a += s * v;
    }
}

/// det(T - xI) from the Hessenberg recurrence, coefficients in ascending order.
pub(crate) fn characteristic_polynomial(t: &RationalMatrix) -> Poly {
    let m = t.rows();
    // H = Tᵀ is upper Hessenberg; q_k = det(xI - H_k).
    let h = |i: usize, j: usize| t.get(j, i);
    let mut q: Vec<Poly> = vec![vec![Rational::one()]];
    for k in 0..m {
        let mut next = poly_mul_linear(&q[k], &(-h(k, k).clone()));
        let mut prod = Rational::one();
        for i in (0..k).rev() {
            prod *= h(i + 1, i);
            let coeff = -(h(i, k) * &prod);
            if !coeff.is_zero() {
                poly_axpy(&mut next, &coeff, &q[i]);
            }
        }
        q.push(next);
    }
    let mut p = q.pop().unwrap_or_default();
    if m % 2 == 1 {
        for c in p.iter_mut() {
            *c = -c.clone();
        }
    }
    p
}

/// (-1)^n α^{n-1} λ^{(n-3)/2} U_{n-1}(√λ / (2α)) expanded as an exact polynomial.
fn chebyshev_form(n: usize, a: &Rational) -> Poly {
    let mut u: Vec<Vec<BigInt>> = vec![vec![BigInt::one()], vec![BigInt::zero(), BigInt::from(2)]];
    for k in 2..n {
        let mut next = vec![BigInt::zero(); k + 1];
        for (i, c) in u[k - 1].iter().enumerate() {
            next[i + 1] += c * 2;
        }
        for (i, c) in u[k - 2].iter().enumerate() {
            next[i] -= c;
        }
        u.push(next);
    }
    let un = &u[n - 1];
    let half = (n - 2) / 2;
    let mut p = vec![Rational::zero(); n - 1];
    let two_a = a * Rational::from_integer(2.into());
    let sign = if n.is_multiple_of(2) {
        Rational::one()
    } else {
        -Rational::one()
    };
    let pref = sign * Pow::pow(a, (n - 1) as u64);
    for (e, c) in un.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        // y^e with e = 2i + 1 gives x^{i + (n-2)/2} / (2α)^e
        let i = (e - 1) / 2;
        p[i + half] += &pref * Rational::from_integer(c.clone()) / Pow::pow(&two_a, e as u64);
    }
    p
}

fn eval_dd(p: &Poly, x: DD) -> (DD, f64) {
    let mut acc = dd::dd(0.0);
    let mut scale = 0.0;
    let xa = x.hi().abs();
    for c in p.iter().rev() {
        let cd = dd::from_rational(c);
        acc = acc * x + cd;
        scale = scale * xa + cd.hi().abs();
    }
    (acc, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicReport {
    pub n: usize,
    pub d: u32,
    /// Coefficients of det(T - x) (ascending), as f64 for display.
    pub coefficients: Vec<f64>,
    pub matches_chebyshev: bool,
    /// |det(T - λ̃_j)| evaluated in double-double, relative to Σ|c_i||λ̃_j|^i.
    pub root_residuals: Vec<f64>,
    /// The same relative magnitude at midpoints between consecutive λ̃_j.
    pub midpoint_values: Vec<f64>,
    pub zero_multiplicity: usize,
    pub failures: Vec<String>,
}

impl CharacteristicReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const ROOT_TOL: f64 = 1e-24;
const SEPARATION_TOL: f64 = 1e-20;

pub fn characteristic_check(n: usize, d: u32) -> Result<CharacteristicReport> {
    check_closed(n, d)?;
    if n > 66 {
        return Err(Error::Capacity(format!(
            "characteristic check limited to n <= 66, got {n}"
        )));
    }
    let t = ToeplitzT::new(n, d)?;
    let poly = characteristic_polynomial(&t.to_rational());
    let cheb = chebyshev_form(n, &t.alpha);
    let mut failures = Vec::new();
    let matches_chebyshev = poly == cheb;
    if !matches_chebyshev {
        failures.push("det(T - x) differs from the Chebyshev form".into());
    }

    let a = dd::from_rational(&t.alpha);
    let m = n / 2 - 1;
    let lams: Vec<DD> = (1..=m)
        .map(|j| {
            let c = dd::cos_pi_frac(j, n);
            a * a * c * c * 4.0
        })
        .collect();
    let root_residuals: Vec<f64> = lams
        .iter()
        .map(|&l| {
            let (v, s) = eval_dd(&poly, l);
            v.hi().abs() / s.max(f64::MIN_POSITIVE)
        })
        .collect();
    for (j, r) in root_residuals.iter().enumerate() {
        if !(*r < ROOT_TOL) {
            failures.push(format!("det(T - λ̃_{}) relative residual {r:e}", j + 1));
        }
    }
    let midpoint_values: Vec<f64> = lams
        .windows(2)
        .map(|w| {
            let (v, s) = eval_dd(&poly, (w[0] + w[1]) * 0.5);
            v.hi().abs() / s.max(f64::MIN_POSITIVE)
        })
        .collect();
    for (j, r) in midpoint_values.iter().enumerate() {
        if !(*r > SEPARATION_TOL) {
            failures.push(format!(
                "det(T - x) vanishes between λ̃_{} and λ̃_{}",
                j + 1,
                j + 2
            ));
        }
    }
    let zero_multiplicity = poly.iter().position(|c| !c.is_zero()).unwrap_or(poly.len());
    if zero_multiplicity != m {
        failures.push(format!(
            "zero root multiplicity {zero_multiplicity}, expected {m}"
        ));
    }
    Ok(CharacteristicReport {
        n,
        d,
        coefficients: poly.iter().map(crate::domain::to_f64).collect(),
        matches_chebyshev,
        root_residuals,
        midpoint_values,
        zero_multiplicity,
        failures,
    })
}
