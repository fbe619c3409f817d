//! Reduced description on contiguous cuts: the affine map I(t+1) = a + T·I(t).

mod closed;
mod spectral;

pub use closed::{
    brickwall_matrix, characteristic_check, closed_eigenvectors, closed_spectrum,
    eigenvector_angle, lambda2, lambda2_tdl, similarity_normalize, toeplitz_power_ranks,
    CharacteristicReport, ClosedSpectrum,
};
pub use spectral::MAX_SPECTRAL_SITES;
pub use spectral::{spectral_data, spectral_propagate, SpectralData, SpectralPropagator};

use nalgebra::DMatrix;
use num_traits::{One, Pow, Zero};
use serde::Serialize;

use crate::domain::{alpha, check_dimension, require_even, Protocol, Rational};
use crate::error::{Error, Result};
use crate::exact::RationalMatrix;
use crate::scalar::Scalar;

/// Contiguous-cut purities at time `t`. Staircase holds I_2..I_{n-1}; brick-wall
/// holds the even cuts I_2, I_4, ..., I_{n-2}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedPurity<S> {
    pub n: usize,
    pub d: u32,
    pub protocol: Protocol,
    pub t: usize,
    pub values: Vec<S>,
}

pub fn reduced_cuts(n: usize, protocol: Protocol) -> Vec<usize> {
    match protocol {
        Protocol::Staircase => (2..n).collect(),
        Protocol::BrickWall => (2..n.saturating_sub(1)).step_by(2).collect(),
    }
}

impl<S: Scalar> ReducedPurity<S> {
    pub fn initial(n: usize, d: u32, protocol: Protocol) -> Result<Self> {
        check_reduced(n, d, protocol)?;
        Ok(ReducedPurity {
            n,
            d,
            protocol,
            t: 0,
            values: vec![S::one(); reduced_cuts(n, protocol).len()],
        })
    }

    pub fn cuts(&self) -> Vec<usize> {
        reduced_cuts(self.n, self.protocol)
    }

    pub fn get(&self, k: usize) -> Option<&S> {
        match self.protocol {
            Protocol::Staircase => k.checked_sub(2).and_then(|i| self.values.get(i)),
            Protocol::BrickWall if k.is_multiple_of(2) => {
                k.checked_sub(2).and_then(|i| self.values.get(i / 2))
            }
            Protocol::BrickWall => None,
        }
    }
}

fn check_reduced(n: usize, d: u32, protocol: Protocol) -> Result<()> {
    check_dimension(d)?;
    match protocol {
        Protocol::Staircase if n < 2 => Err(Error::Domain(format!("need n >= 2, got {n}"))),
        Protocol::BrickWall => {
            require_even(n)?;
            if n < 4 {
                return Err(Error::Domain(format!("brick-wall needs n >= 4, got {n}")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Toeplitz part of the staircase map, T_{ij} = a_{i-j}.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzT {
    pub n: usize,
    pub d: u32,
    pub alpha: Rational,
}

impl ToeplitzT {
    pub fn new(n: usize, d: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("T needs n >= 3, got {n}")));
        }
        Ok(ToeplitzT {
            n,
            d,
            alpha: alpha(d)?,
        })
    }

    pub fn size(&self) -> usize {
        self.n - 2
    }

    /// Symbol coefficient a_p: a_{-1} = α, a_p = α^{p+2} for p >= 0.
    pub fn coefficient(&self, p: i64) -> Rational {
        symbol_coefficient(&self.alpha, p)
    }

    pub fn entry(&self, i: usize, j: usize) -> Rational {
        self.coefficient(i as i64 - j as i64)
    }

    pub fn to_rational(&self) -> RationalMatrix {
        let m = self.size();
        let coeffs: Vec<Rational> = (0..m as i64).map(|p| self.coefficient(p)).collect();
        RationalMatrix::from_fn(m, m, |i, j| {
            if j == i + 1 {
                self.alpha.clone()
            } else if j <= i {
                coeffs[i - j].clone()
            } else {
                Rational::zero()
            }
        })
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let m = self.size();
        let a = Scalar::to_f64(&self.alpha);
        let mut pw = vec![a * a; m];
        for p in 1..m {
            pw[p] = pw[p - 1] * a;
        }
        DMatrix::from_fn(m, m, |i, j| {
            if j == i + 1 {
                a
            } else if j <= i {
                pw[i - j]
            } else {
                0.0
            }
        })
    }
}

pub fn symbol_coefficient(alpha: &Rational, p: i64) -> Rational {
    match p {
        -1 => alpha.clone(),
        p if p >= 0 => Pow::pow(alpha, (p + 2) as u64),
        _ => Rational::zero(),
    }
}

/// The full n×n matrix acting on (1, I_2, ..., I_{n-1}, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineA {
    pub n: usize,
    pub d: u32,
    pub alpha: Rational,
}

impl AffineA {
    pub fn new(n: usize, d: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("A needs n >= 3, got {n}")));
        }
        Ok(AffineA {
            n,
            d,
            alpha: alpha(d)?,
        })
    }

    /// First-column coupling (α², ..., α^{n-1}).
    pub fn a1(&self) -> Vec<Rational> {
        (2..self.n)
            .map(|k| Pow::pow(&self.alpha, k as u64))
            .collect()
    }

    /// Last-column coupling (0, ..., 0, α).
    pub fn a2(&self) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n - 2];
        if let Some(last) = v.last_mut() {
            *last = self.alpha.clone();
        }
        v
    }

    pub fn a(&self) -> Vec<Rational> {
        self.a1()
            .into_iter()
            .zip(self.a2())
            .map(|(x, y)| x + y)
            .collect()
    }

    pub fn to_rational(&self) -> RationalMatrix {
        let n = self.n;
        let t = ToeplitzT {
            n,
            d: self.d,
            alpha: self.alpha.clone(),
        }
        .to_rational();
        let a1 = self.a1();
        let a2 = self.a2();
        RationalMatrix::from_fn(n, n, |i, j| {
            if i == 0 || i == n - 1 {
                if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            } else if j == 0 {
                a1[i - 1].clone()
            } else if j == n - 1 {
                a2[i - 1].clone()
            } else {
                t.get(i - 1, j - 1).clone()
            }
        })
    }
}

struct StepCoefficients<S> {
    alpha: S,
    alpha_sq: S,
    powers: Vec<S>,
}

impl<S: Scalar> StepCoefficients<S> {
    fn new(n: usize, d: u32) -> Result<Self> {
        let a = alpha(d)?;
        let alpha = S::from_rational(&a);
        let mut powers = Vec::with_capacity(n + 1);
        let mut p = Rational::one();
        for _ in 0..=n {
            powers.push(S::from_rational(&p));
            p *= &a;
        }
        Ok(StepCoefficients {
            alpha_sq: alpha.clone() * alpha.clone(),
            alpha,
            powers,
        })
    }
}

fn staircase_step<S: Scalar>(values: &[S], c: &StepCoefficients<S>) -> Vec<S> {
    let m = values.len();
    let mut out = Vec::with_capacity(m);
    let mut running = S::zero();
    for i in 0..m {
        let k = i + 2;
        running = c.alpha.clone() * running + values[i].clone();
        let right = if i + 1 < m {
            values[i + 1].clone()
        } else {
            S::one()
        };
        out.push(
            c.powers[k].clone() + c.alpha_sq.clone() * running.clone() + c.alpha.clone() * right,
        );
    }
    out
}

fn brickwall_step<S: Scalar>(values: &[S], c: &StepCoefficients<S>) -> Vec<S> {
    let m = values.len();
    let at = |i: isize| -> S {
        if i < 0 || i as usize >= m {
            S::one()
        } else {
            values[i as usize].clone()
        }
    };
    (0..m as isize)
        .map(|i| {
            let sum = at(i - 1) + at(i) + at(i) + at(i + 1);
            c.alpha_sq.clone() * sum
        })
        .collect()
}

/// One application of the affine map.
pub fn recursion_step<S: Scalar>(state: &ReducedPurity<S>) -> Result<ReducedPurity<S>> {
    check_reduced(state.n, state.d, state.protocol)?;
    if state.values.len() != reduced_cuts(state.n, state.protocol).len() {
        return Err(Error::Domain(
            "reduced vector length does not match n".into(),
        ));
    }
    let c = StepCoefficients::<S>::new(state.n, state.d)?;
    let values = match state.protocol {
        Protocol::Staircase => staircase_step(&state.values, &c),
        Protocol::BrickWall => brickwall_step(&state.values, &c),
    };
    Ok(ReducedPurity {
        values,
        t: state.t + 1,
        ..state.clone()
    })
}

/// Series I(0), ..., I(t) from the all-ones initial vector.
pub fn propagate_reduced<S: Scalar>(
    n: usize,
    d: u32,
    t: usize,
    protocol: Protocol,
) -> Result<Vec<ReducedPurity<S>>> {
    let mut cur = ReducedPurity::<S>::initial(n, d, protocol)?;
    let c = StepCoefficients::<S>::new(n, d)?;
    let mut out = Vec::with_capacity(t + 1);
    for step in 1..=t {
        let next = match protocol {
            Protocol::Staircase => staircase_step(&cur.values, &c),
            Protocol::BrickWall => brickwall_step(&cur.values, &c),
        };
        let prev = std::mem::replace(&mut cur.values, next);
        out.push(ReducedPurity {
            values: prev,
            ..cur.clone()
        });
        cur.t = step;
    }
    out.push(cur);
    Ok(out)
}

/// Single-cut series I_k(0..=t).
pub fn cut_series<S: Scalar>(
    n: usize,
    d: u32,
    k: usize,
    t: usize,
    protocol: Protocol,
) -> Result<Vec<S>> {
    let mut cur = ReducedPurity::<S>::initial(n, d, protocol)?;
    let idx = cur.cuts().iter().position(|&c| c == k).ok_or_else(|| {
        Error::Domain(format!(
            "cut k = {k} is not tracked for n = {n}, {protocol}"
        ))
    })?;
    let c = StepCoefficients::<S>::new(n, d)?;
    let mut out = Vec::with_capacity(t + 1);
    out.push(cur.values[idx].clone());
    for _ in 0..t {
        cur.values = match protocol {
            Protocol::Staircase => staircase_step(&cur.values, &c),
            Protocol::BrickWall => brickwall_step(&cur.values, &c),
        };
        out.push(cur.values[idx].clone());
    }
    Ok(out)
}

/// Closed forms for t = 1, 2, 3. They treat the chain as unbounded on the
/// right, so they agree with the affine map only when k + t <= n
/// (see [`closed_form_exact_domain`]).
pub fn closed_form_small_t(k: usize, n: usize, d: u32, t: usize) -> Result<Rational> {
    if !(1..=3).contains(&t) {
        return Err(Error::Unsupported(format!(
            "closed forms exist for t = 1, 2, 3, not {t}"
        )));
    }
    if n < 2 * t {
        return Err(Error::Domain(format!(
            "closed form at t = {t} needs n >= {}, got {n}",
            2 * t
        )));
    }
    if k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k as i64,
            lo: 0,
            hi: n as i64,
        });
    }
    let a = alpha(d)?;
    let one = Rational::one();
    let beta = &one - &a;
    let ratio = &a / &beta;
    let ak: Rational = Pow::pow(&a, k as u64);
    let lead = &one - &a * Rational::from_integer(2.into());
    let kq = Rational::from_integer(k.into());
    let a2 = &a * &a;
    Ok(match t {
        1 => &ratio + &ak * &lead / &beta,
        2 => Pow::pow(&ratio, 2u32) + &ak * &lead / &beta * (one.clone() / &beta + &a2 * &kq),
        _ => {
            let half = Rational::new(1.into(), 2.into());
            let three = Rational::from_integer(3.into());
            let bracket = (&one - &a * &beta)
                + &kq * &a2 * &beta * (&one + &three * &a2 * &beta * &half)
                + &kq * &kq * &a2 * &a2 * &beta * &beta * &half;
            Pow::pow(&ratio, 3u32) + &ak * &lead * bracket / Pow::pow(&beta, 3u32)
        }
    })
}

/// Cuts where the t-step closed form is free of right-boundary corrections.
pub fn closed_form_exact_domain(k: usize, n: usize, t: usize) -> bool {
    k + t <= n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{contiguous_mask, rational, CircuitConfig};
    use crate::markov::{full_cut_series, propagate_full_with, Representation};
    use proptest::prelude::*;

    #[test]
    fn recursion_examples() {
        let s = propagate_reduced::<Rational>(6, 2, 1, Protocol::Staircase).unwrap();
        assert_eq!(s[1].get(2).unwrap(), &rational(18, 25));
        let s = propagate_reduced::<Rational>(8, 2, 2, Protocol::Staircase).unwrap();
        assert_eq!(s[2].get(4).unwrap(), &rational(464128, 1_000_000));
        let s = propagate_reduced::<Rational>(8, 3, 1, Protocol::Staircase).unwrap();
        assert_eq!(s[1].get(2).unwrap(), &rational(48, 100));
        let one = ReducedPurity::<Rational>::initial(8, 2, Protocol::Staircase).unwrap();
        assert_eq!(recursion_step(&one).unwrap(), s_at(8, 2, 1));
    }

    fn s_at(n: usize, d: u32, t: usize) -> ReducedPurity<Rational> {
        propagate_reduced::<Rational>(n, d, t, Protocol::Staircase)
            .unwrap()
            .pop()
            .unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_small_t(2, 4, 2, 1).unwrap(), rational(18, 25));
        assert_eq!(
            closed_form_small_t(4, 8, 2, 2).unwrap(),
            rational(464128, 1_000_000)
        );
        for n in [4usize, 10, 20] {
            let k = n / 2;
            let expect = rational(3, 7) + rational(4, 7) * Pow::pow(rational(3, 10), k as u64);
            assert_eq!(closed_form_small_t(k, n, 3, 1).unwrap(), expect);
        }
        assert!(closed_form_small_t(2, 5, 2, 3).is_err());
        assert!(closed_form_small_t(2, 8, 2, 4).is_err());
    }

    #[test]
    fn closed_forms_match_inside_domain() {
        for d in 2..=4 {
            for t in 1..=3 {
                for n in (2 * t).max(2)..=16 {
                    let exact = s_at(n, d, t);
                    for k in 2..n {
                        let cf = closed_form_small_t(k, n, d, t).unwrap();
                        let same = &cf == exact.get(k).unwrap();
                        assert_eq!(
                            same,
                            closed_form_exact_domain(k, n, t),
                            "d={d} t={t} n={n} k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_matches_full() {
        for d in 2..=4 {
            for n in 3..=10 {
                let full =
                    full_cut_series::<Rational>(&CircuitConfig::new(d, n).unwrap(), 6).unwrap();
                let red = propagate_reduced::<Rational>(n, d, 6, Protocol::Staircase).unwrap();
                for t in 0..=6 {
                    for k in 2..n {
                        assert_eq!(
                            &full[t][k],
                            red[t].get(k).unwrap(),
                            "d={d} n={n} t={t} k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn brickwall_matches_full() {
        for d in [2, 3] {
            for n in [4usize, 6, 8, 10] {
                let cfg = CircuitConfig::new(d, n)
                    .unwrap()
                    .with_protocol(Protocol::BrickWall);
                let red = propagate_reduced::<Rational>(n, d, 5, Protocol::BrickWall).unwrap();
                let mut t = 0;
                propagate_full_with::<Rational>(&cfg, 5, Representation::KuoPurity, |v| {
                    for k in red[t].cuts() {
                        let m = contiguous_mask(n, k).unwrap().mask() as usize;
                        assert_eq!(&v.values[m], red[t].get(k).unwrap());
                    }
                    t += 1;
                })
                .unwrap();
            }
        }
    }

    #[test]
    fn affine_matrix_consistent() {
        let a = AffineA::new(7, 3).unwrap();
        let m = a.to_rational();
        let mut x = vec![Rational::one(); 7];
        let red = propagate_reduced::<Rational>(7, 3, 4, Protocol::Staircase).unwrap();
        for r in red.iter().skip(1) {
            x = m.mul_vec(&x);
            assert_eq!(&x[1..6], &r.values[..]);
        }
        assert_eq!(a.a()[4], Pow::pow(rational(3, 10), 6u32) + rational(3, 10));
    }

    #[test]
    fn toeplitz_entries() {
        let t = ToeplitzT::new(6, 2).unwrap();
        assert_eq!(t.entry(0, 1), rational(2, 5));
        assert_eq!(t.entry(0, 2), rational(0, 1));
        assert_eq!(t.entry(3, 0), Pow::pow(rational(2, 5), 5u32));
        let f = t.to_f64();
        let r = t.to_rational();
        for i in 0..4 {
            for j in 0..4 {
                assert!((f[(i, j)] - Scalar::to_f64(r.get(i, j))).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn phantom_structure_divisible() {
        // I_{n/2}(t) - λ_ph^t carries the full α^{n/2} prefactor
        for d in [2u32, 3] {
            let a = alpha(d).unwrap();
            let lph = &a / (Rational::one() - &a);
            for n in [8usize, 10, 12] {
                let s = propagate_reduced::<Rational>(n, d, n / 2, Protocol::Staircase).unwrap();
                for t in 1..=n / 2 {
                    let diff = s[t].get(n / 2).unwrap() - Pow::pow(&lph, t as u64);
                    let q = diff / Pow::pow(&a, (n / 2) as u64);
                    // no factor of d survives in the denominator
                    let g = num_integer::Integer::gcd(q.denom(), &num_bigint::BigInt::from(d));
                    assert!(g.is_one(), "d={d} n={n} t={t}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn staircase_bounds(d in 2u32..6, n in 4usize..30, t in 0usize..30) {
            let a = crate::domain::alpha_f64(d).unwrap();
            let lph = a / (1.0 - a);
            let s = propagate_reduced::<f64>(n, d, t, Protocol::Staircase).unwrap();
            for v in &s[t].values {
                prop_assert!(*v <= 1.0 + 1e-15);
                prop_assert!(*v >= lph.powi(t as i32) * (1.0 - 1e-12));
            }
        }
    }
}
