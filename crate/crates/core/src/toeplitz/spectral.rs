//! A^t·1 from the eigen-decomposition of A plus its single nilpotent Jordan block.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{AffineA, ReducedPurity};
use crate::dd::{self, DD};
use crate::domain::{check_dimension, lubkin_purity, rational, require_even, Protocol, Rational};
use crate::error::{Error, Result};
use crate::exact::{dot, Solver};

pub const MAX_SPECTRAL_SITES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    pub n: usize,
    pub d: u32,
    pub angles: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Unnormalized closed-form eigenvectors of T (components k = 1..n-2).
    pub right: Vec<Vec<f64>>,
    pub left: Vec<Vec<f64>>,
    /// ⟨L_j|R_j⟩.
    pub overlaps: Vec<f64>,
    /// Right chain r_1..r_m of A (r_1 spans ker A, A r_{k+1} = r_k), m = n/2 - 1.
    pub chain_right: Vec<Vec<Rational>>,
    /// Left chain l_1..l_m (l_m spans the left kernel, l_k A = l_{k+1}), with ⟨l_i|r_j⟩ = δ_ij.
    pub chain_left: Vec<Vec<Rational>>,
    pub steady_right: Vec<Rational>,
    pub steady_left: Vec<Rational>,
}

fn check_spectral(n: usize, d: u32) -> Result<()> {
    check_dimension(d)?;
    require_even(n)?;
    if !(4..=MAX_SPECTRAL_SITES).contains(&n) {
        return Err(Error::Capacity(format!(
            "spectral propagation needs 4 <= n <= {MAX_SPECTRAL_SITES}, got {n}"
        )));
    }
    Ok(())
}

/// Builds the nilpotent chains of A exactly and biorthonormalizes them.
fn jordan_chains(n: usize, d: u32) -> Result<(Vec<Vec<Rational>>, Vec<Vec<Rational>>)> {
    let a = AffineA::new(n, d)?.to_rational();
    let m = n / 2 - 1;
    let at = a.transpose();
    let kernel = a.nullspace();
    let left_kernel = at.nullspace();
    if kernel.len() != 1 || left_kernel.len() != 1 {
        return Err(Error::Internal(format!(
            "n = {n}, d = {d}: kernel dimensions {} (right) and {} (left), expected 1",
            kernel.len(),
            left_kernel.len()
        )));
    }
    let solve_a = Solver::new(&a);
    let solve_at = Solver::new(&at);
    let mut p = vec![kernel[0].clone()];
    for k in 1..m {
        let next = solve_a.solve(&p[k - 1]).ok_or_else(|| {
            Error::Internal(format!(
                "n = {n}, d = {d}: right chain breaks at length {k}"
            ))
        })?;
        p.push(next);
    }
    let mut q = vec![left_kernel[0].clone()];
    for k in 1..m {
        let next = solve_at.solve(&q[k - 1]).ok_or_else(|| {
            Error::Internal(format!("n = {n}, d = {d}: left chain breaks at length {k}"))
        })?;
        q.push(next);
    }
    q.reverse();
    // Gram matrix ⟨q_i|p_j⟩ is upper-triangular Toeplitz with symbol g; apply g⁻¹ to p.
    let g: Vec<Rational> = p.iter().map(|v| dot(&q[0], v)).collect();
    if g[0].is_zero() {
        return Err(Error::Internal(format!(
            "n = {n}, d = {d}: chain pairing is degenerate"
        )));
    }
    let mut beta = vec![g[0].recip()];
    for s in 1..m {
        let acc = (1..=s).fold(Rational::zero(), |acc, r| acc + &g[r] * &beta[s - r]);
        beta.push(-acc / &g[0]);
    }
    let p: Vec<Vec<Rational>> = (0..m)
        .map(|k| {
            let mut v = vec![Rational::zero(); n];
            for s in 0..=k {
                for (x, y) in v.iter_mut().zip(&p[k - s]) {
                    *x += &beta[s] * y;
                }
            }
            v
        })
        .collect();
    for (i, qi) in q.iter().enumerate() {
        for (j, pj) in p.iter().enumerate() {
            let expect = if i == j {
                Rational::one()
            } else {
                Rational::zero()
            };
            if dot(qi, pj) != expect {
                return Err(Error::Internal(format!(
                    "n = {n}, d = {d}: chains not biorthonormal at ({i}, {j})"
                )));
            }
        }
    }
    Ok((p, q))
}

struct Mode {
    lambda: DD,
    /// w_j·R_j restricted to the interior, with w_j = ⟨L̃_j|1⟩ / ⟨L_j|R_j⟩.
    weighted: Vec<DD>,
    right: Vec<DD>,
    left: Vec<DD>,
    overlap: DD,
}

fn mode(n: usize, j: usize, a: DD) -> Mode {
    let c = dd::cos_pi_frac(j, n);
    let g = a * c * 2.0;
    let lambda = g * g;
    let u = dd::chebyshev_u(c, n);
    let m = n - 2;
    // powers g^{e} for e = -1..=n
    let ginv = dd::recip(g);
    let mut gp = Vec::with_capacity(n + 2);
    gp.push(ginv);
    gp.push(dd::dd(1.0));
    for e in 1..=n {
        let next = gp[e] * g;
        gp.push(next);
    }
    let gpow = |e: isize| gp[(e + 1) as usize];
    let right: Vec<DD> = (1..=m).map(|k| gpow(k as isize - 2) * u[k]).collect();
    let left: Vec<DD> = (1..=m)
        .map(|k| gpow(n as isize - 3 - k as isize) * u[n - 1 - k])
        .collect();
    let overlap = left
        .iter()
        .zip(&right)
        .fold(dd::dd(0.0), |acc, (x, y)| acc + *x * *y);
    // border components of the left eigenvector of A
    let mut ak = a * a;
    let mut la1 = dd::dd(0.0);
    for l in &left {
        la1 += *l * ak;
        ak *= a;
    }
    let la2 = left[m - 1] * a;
    let denom = lambda - 1.0;
    let total = left.iter().fold(dd::dd(0.0), |acc, x| acc + *x) + dd::div(la1 + la2, denom);
    let w = dd::div(total, overlap);
    let weighted = right.iter().map(|r| *r * w).collect();
    Mode {
        lambda,
        weighted,
        right,
        left,
        overlap,
    }
}

/// Precomputed decomposition of A for repeated evaluation of A^t·1.
pub struct SpectralPropagator {
    n: usize,
    d: u32,
    steady: Vec<DD>,
    modes: Vec<Mode>,
    kernel_vectors: Vec<Vec<DD>>,
    kernel_weights: Vec<DD>,
    chains: (Vec<Vec<Rational>>, Vec<Vec<Rational>>),
}

impl SpectralPropagator {
    pub fn new(n: usize, d: u32) -> Result<Self> {
        check_spectral(n, d)?;
        let alpha = crate::domain::alpha(d)?;
        let a = dd::from_rational(&alpha);
        let steady = (2..n)
            .map(|k| lubkin_purity(d, n, k).map(|q| dd::from_rational(&q)))
            .collect::<Result<Vec<_>>>()?;
        let modes: Vec<Mode> = (1..n / 2).into_par_iter().map(|j| mode(n, j, a)).collect();
        let (p, q) = jordan_chains(n, d)?;
        let kernel_vectors = p
            .iter()
            .map(|v| v[1..n - 1].iter().map(dd::from_rational).collect())
            .collect();
        let kernel_weights = q
            .iter()
            .map(|v| dd::from_rational(&v.iter().fold(Rational::zero(), |acc, x| acc + x)))
            .collect();
        Ok(SpectralPropagator {
            n,
            d,
            steady,
            modes,
            kernel_vectors,
            kernel_weights,
            chains: (p, q),
        })
    }

    /// Interior purities I_2..I_{n-1} at time t.
    pub fn purity(&self, t: usize, include_kernel: bool) -> ReducedPurity<f64> {
        let mut acc = self.steady.clone();
        for mode in &self.modes {
            let lt = dd::powi(mode.lambda, t as u64);
            for (x, w) in acc.iter_mut().zip(&mode.weighted) {
                *x += lt * *w;
            }
        }
        if include_kernel {
            let m = self.kernel_vectors.len();
            for i in 0..m.saturating_sub(t) {
                let c = self.kernel_weights[i + t];
                for (x, p) in acc.iter_mut().zip(&self.kernel_vectors[i]) {
                    *x += *p * c;
                }
            }
        }
        ReducedPurity {
            n: self.n,
            d: self.d,
            protocol: Protocol::Staircase,
            t,
            values: acc.into_iter().map(dd::to_f64).collect(),
        }
    }

    pub fn data(&self) -> SpectralData {
        let n = self.n;
        let mut steady_right = vec![Rational::one()];
        steady_right.extend((2..n).map(|k| lubkin_purity(self.d, n, k).unwrap_or_default()));
        steady_right.push(Rational::one());
        let mut steady_left = vec![Rational::zero(); n];
        steady_left[0] = rational(1, 2);
        steady_left[n - 1] = rational(1, 2);
        let to_f = |v: &[DD]| v.iter().map(|x| dd::to_f64(*x)).collect::<Vec<f64>>();
        SpectralData {
            n,
            d: self.d,
            angles: (1..n / 2)
                .map(|j| j as f64 * std::f64::consts::PI / n as f64)
                .collect(),
            eigenvalues: self.modes.iter().map(|m| dd::to_f64(m.lambda)).collect(),
            right: self.modes.iter().map(|m| to_f(&m.right)).collect(),
            left: self.modes.iter().map(|m| to_f(&m.left)).collect(),
            overlaps: self.modes.iter().map(|m| dd::to_f64(m.overlap)).collect(),
            chain_right: self.chains.0.clone(),
            chain_left: self.chains.1.clone(),
            steady_right,
            steady_left,
        }
    }
}

pub fn spectral_data(n: usize, d: u32) -> Result<SpectralData> {
    Ok(SpectralPropagator::new(n, d)?.data())
}

pub fn spectral_propagate(
    n: usize,
    d: u32,
    t: usize,
    include_kernel: bool,
) -> Result<ReducedPurity<f64>> {
    Ok(SpectralPropagator::new(n, d)?.purity(t, include_kernel))
}
