//! Double-double helpers for cancellation-heavy spectral sums.

use num_traits::ToPrimitive;
use twofloat::TwoFloat;

use crate::domain::Rational;

pub type DD = TwoFloat;

pub fn dd(x: f64) -> DD {
    TwoFloat::from(x)
}

pub fn from_rational(q: &Rational) -> DD {
    let hi = q.to_f64().unwrap_or(f64::NAN);
    if !hi.is_finite() || hi == 0.0 {
        return dd(hi);
    }
    let Some(h) = Rational::from_float(hi) else {
        return dd(hi);
    };
    let lo = (q - h).to_f64().unwrap_or(0.0);
    TwoFloat::new_add(hi, lo)
}

/// U_0(x), ..., U_{kmax}(x).
pub fn chebyshev_u(x: DD, kmax: usize) -> Vec<DD> {
    let mut u = Vec::with_capacity(kmax + 1);
    u.push(dd(1.0));
    if kmax >= 1 {
        u.push(x * 2.0);
    }
    for k in 2..=kmax {
        let next = x * 2.0 * u[k - 1] - u[k - 2];
        u.push(next);
    }
    u
}

/// cos(jπ/n) to double-double accuracy, by Newton refinement on U_{n-1}.
pub fn cos_pi_frac(j: usize, n: usize) -> DD {
    let x0 = (j as f64 * std::f64::consts::PI / n as f64).cos();
    if 2 * j == n {
        return dd(0.0);
    }
    let mut x = dd(x0);
    for _ in 0..3 {
        let (mut u0, mut u1) = (dd(1.0), x * 2.0);
        let (mut d0, mut d1) = (dd(0.0), dd(2.0));
        for _ in 2..n {
            let u2 = x * 2.0 * u1 - u0;
            let d2 = u1 * 2.0 + x * 2.0 * d1 - d0;
            (u0, u1, d0, d1) = (u1, u2, d1, d2);
        }
        if d1.hi() == 0.0 {
            break;
        }
        x -= div(u1, d1);
    }
    x
}

/// Double-double quotient by long division; twofloat's own `/` keeps only
/// double precision.
pub fn div(a: DD, b: DD) -> DD {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

pub fn recip(b: DD) -> DD {
    div(dd(1.0), b)
}

pub fn powi(x: DD, mut e: u64) -> DD {
    let mut base = x;
    let mut acc = dd(1.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

pub fn to_f64(x: DD) -> f64 {
    x.hi() + x.lo()
}
