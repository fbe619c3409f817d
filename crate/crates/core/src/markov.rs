//! Exact average-purity dynamics on the full 2^n space of bipartitions.

use std::collections::BTreeMap;

use nalgebra::Matrix4;
use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    alpha, check_dimension, full_mask, lubkin_purity, rational, require_even, Bipartition,
    CircuitConfig, Protocol, Rational,
};
use crate::error::{Error, Result};
use crate::exact::{dot, integer_row_basis, RationalMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    /// Purity basis, valid for every d.
    KuoPurity,
    /// Symmetric XY-chain form, qubits only.
    SymmetricXyD2,
    /// Non-symmetric coefficient form, qubits only.
    NonSymmetricD2,
}

/// Two-site matrix in the local basis {00, 10, 01, 11}; local index = s_j + 2 s_{j+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix4 {
    pub rep: Representation,
    pub d: u32,
    pub entries: [[Rational; 4]; 4],
}

impl GateMatrix4 {
    pub fn to_f64(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in self.entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i][j] = Scalar::to_f64(v);
            }
        }
        out
    }

    fn to_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_fn(4, 4, |i, j| self.entries[i][j].clone())
    }

    fn sparse<S: Scalar>(&self) -> LocalGate<S> {
        let mut rows: [Vec<(usize, S)>; 4] = Default::default();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    rows[i].push((j, S::from_rational(v)));
                }
            }
        }
        LocalGate { rows }
    }
}

struct LocalGate<S> {
    rows: [Vec<(usize, S)>; 4],
}

impl<S: Scalar> LocalGate<S> {
    #[inline]
    fn apply(&self, a: &mut S, b: &mut S, c: &mut S, e: &mut S) {
        let x = [a.clone(), b.clone(), c.clone(), e.clone()];
        let out = |r: &[(usize, S)]| {
            r.iter()
                .fold(S::zero(), |acc, (j, g)| acc + g.clone() * x[*j].clone())
        };
        *a = out(&self.rows[0]);
        *b = out(&self.rows[1]);
        *c = out(&self.rows[2]);
        *e = out(&self.rows[3]);
    }
}

pub fn gate_matrix(rep: Representation, d: u32) -> Result<GateMatrix4> {
    check_dimension(d)?;
    let z = || Rational::zero();
    let entries = match rep {
        Representation::KuoPurity => {
            let a = alpha(d)?;
            [
                [Rational::one(), z(), z(), z()],
                [a.clone(), z(), z(), a.clone()],
                [a.clone(), z(), z(), a],
                [z(), z(), z(), Rational::one()],
            ]
        }
        Representation::SymmetricXyD2 => {
            require_qubits(rep, d)?;
            let h = rational(1, 2);
            [
                [rational(9, 10), z(), z(), rational(3, 10)],
                [z(), h.clone(), h.clone(), z()],
                [z(), h.clone(), h, z()],
                [rational(3, 10), z(), z(), rational(1, 10)],
            ]
        }
        Representation::NonSymmetricD2 => {
            require_qubits(rep, d)?;
            let f = rational(1, 5);
            let t = rational(3, 5);
            [
                [Rational::one(), z(), z(), z()],
                [z(), f.clone(), f.clone(), f.clone()],
                [z(), f.clone(), f.clone(), f],
                [z(), t.clone(), t.clone(), t],
            ]
        }
    };
    Ok(GateMatrix4 { rep, d, entries })
}

fn require_qubits(rep: Representation, d: u32) -> Result<()> {
    if d != 2 {
        return Err(Error::Unsupported(format!(
            "{rep:?} representation is only defined for d = 2 (got d = {d})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub rep: Representation,
    pub d: u32,
    /// M equals |r1><l1| + |r2><l2| exactly, with biorthonormal unit eigenpairs.
    pub reconstruction_exact: bool,
    pub unit_eigenvalues: usize,
    pub rank: usize,
    pub singular_values: [f64; 4],
    pub expected_singular_values: [f64; 4],
    pub max_singular_error: f64,
    /// (A1⊗A1)^{-1} Kuo (A1⊗A1) = XY, checked exactly in Q(√3); d = 2 only.
    pub similarity_exact: Option<bool>,
    pub failures: Vec<String>,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

type Pair = ([Rational; 4], [Rational; 4]);

fn projector_pairs(rep: Representation, d: u32) -> Result<[Pair; 2]> {
    let q = |v: [i64; 4], den: i64| v.map(|x| rational(x, den));
    Ok(match rep {
        Representation::KuoPurity => {
            let a = alpha(d)?;
            [
                (q([1, 0, 0, -1], 1), q([1, 0, 0, 0], 1)),
                (
                    [Rational::zero(), a.clone(), a, Rational::one()],
                    q([1, 0, 0, 1], 1),
                ),
            ]
        }
        Representation::SymmetricXyD2 => [
            (q([3, 0, 0, 1], 1), q([3, 0, 0, 1], 10)),
            (q([0, 1, 1, 0], 1), q([0, 1, 1, 0], 2)),
        ],
        Representation::NonSymmetricD2 => [
            (q([1, 0, 0, 0], 1), q([1, 0, 0, 0], 1)),
            (q([0, 1, 1, 3], 5), q([0, 1, 1, 1], 1)),
        ],
    })
}

fn expected_singular_values(rep: Representation, d: u32) -> Result<[f64; 4]> {
    Ok(match rep {
        Representation::KuoPurity => {
            let a = crate::domain::alpha_f64(d)?;
            [(1.0 + 4.0 * a * a).sqrt(), 1.0, 0.0, 0.0]
        }
        Representation::SymmetricXyD2 => [1.0, 1.0, 0.0, 0.0],
        Representation::NonSymmetricD2 => [33f64.sqrt() / 5.0, 1.0, 0.0, 0.0],
    })
}

pub fn gate_decomposition_checks(rep: Representation, d: u32) -> Result<DecompositionReport> {
    let g = gate_matrix(rep, d)?;
    let m = g.to_matrix();
    let mut failures = Vec::new();

    let pairs = projector_pairs(rep, d)?;
    let mut recon = RationalMatrix::zeros(4, 4);
    let mut unit = 0;
    for (idx, (r, l)) in pairs.iter().enumerate() {
        let right_ok = m.mul_vec(r) == r.to_vec();
        let left_ok = m.vec_mul(l) == l.to_vec();
        if right_ok && left_ok {
            unit += 1;
        } else {
            failures.push(format!("pair {} is not a unit eigenpair", idx + 1));
        }
        for (jdx, (r2, _)) in pairs.iter().enumerate() {
            let expect = if idx == jdx {
                Rational::one()
            } else {
                Rational::zero()
            };
            if dot(l, r2) != expect {
                failures.push(format!("<l{}|r{}> != {}", idx + 1, jdx + 1, expect));
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let v = recon.get(i, j) + &r[i] * &l[j];
                recon.set(i, j, v);
            }
        }
    }
    let reconstruction_exact = recon == m;
    if !reconstruction_exact {
        failures.push("projector reconstruction differs from the gate matrix".into());
    }
    let rank = m.rank();
    if rank != 2 {
        failures.push(format!("rank {rank}, expected 2"));
    }

    let f = g.to_f64();
    let mf = Matrix4::from_fn(|i, j| f[i][j]);
    let mut sv: Vec<f64> = mf.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let singular_values = [sv[0], sv[1], sv[2], sv[3]];
    let expected = expected_singular_values(rep, d)?;
    let max_singular_error = singular_values
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_singular_error > 1e-12 {
        failures.push(format!("singular values off by {max_singular_error:e}"));
    }

    let similarity_exact = (d == 2).then(xy_similarity_holds);
    if similarity_exact == Some(false) {
        failures.push("XY similarity does not hold".into());
    }

    Ok(DecompositionReport {
        rep,
        d,
        reconstruction_exact,
        unit_eigenvalues: unit,
        rank,
        singular_values,
        expected_singular_values: expected,
        max_singular_error,
        similarity_exact,
        failures,
    })
}

/// Element a + b√3 of Q(√3).
#[derive(Debug, Clone, PartialEq)]
struct QSqrt3 {
    a: Rational,
    b: Rational,
}

impl QSqrt3 {
    fn new(a: Rational, b: Rational) -> Self {
        QSqrt3 { a, b }
    }
    fn zero() -> Self {
        Self::new(Rational::zero(), Rational::zero())
    }
    fn add(&self, o: &Self) -> Self {
        Self::new(&self.a + &o.a, &self.b + &o.b)
    }
    fn mul(&self, o: &Self) -> Self {
        Self::new(
            &self.a * &o.a + &self.b * &o.b * rational(3, 1),
            &self.a * &o.b + &self.b * &o.a,
        )
    }
}

/// Checks Kuo·A = A·XY with A = A1⊗A1, which is the similarity without inverting A.
fn xy_similarity_holds() -> bool {
    let (Ok(kuo), Ok(xy)) = (
        gate_matrix(Representation::KuoPurity, 2),
        gate_matrix(Representation::SymmetricXyD2, 2),
    ) else {
        return false;
    };
    let s3 = QSqrt3::new(Rational::zero(), Rational::one());
    let one = QSqrt3::new(Rational::one(), Rational::zero());
    let neg = QSqrt3::new(-Rational::one(), Rational::zero());
    let a1 = [[s3.clone(), one.clone()], [s3, neg]];
    // local index = x_j + 2 x_k
    let a = |i: usize, j: usize| a1[i & 1][j & 1].mul(&a1[i >> 1][j >> 1]);
    let lift = |q: &Rational| QSqrt3::new(q.clone(), Rational::zero());
    (0..4).all(|i| {
        (0..4).all(|j| {
            let mut lhs = QSqrt3::zero();
            let mut rhs = QSqrt3::zero();
            for k in 0..4 {
                lhs = lhs.add(&lift(&kuo.entries[i][k]).mul(&a(k, j)));
                rhs = rhs.add(&a(i, k).mul(&lift(&xy.entries[k][j])));
            }
            lhs == rhs
        })
    })
}

/// 2^n values indexed by bipartition mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PurityVectorFull<S> {
    pub n: usize,
    pub d: u32,
    pub rep: Representation,
    pub t: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> PurityVectorFull<S> {
    pub fn get(&self, mask: u64) -> &S {
        &self.values[mask as usize]
    }
}

fn check_full_capacity<S: Scalar>(n: usize) -> Result<()> {
    if n > S::MAX_FULL_SITES {
        return Err(Error::Capacity(format!(
            "full 2^n purity vector with n = {n} exceeds the {} mode limit n <= {}",
            S::NAME,
            S::MAX_FULL_SITES
        )));
    }
    Ok(())
}

fn check_propagatable(rep: Representation) -> Result<()> {
    if rep == Representation::SymmetricXyD2 {
        return Err(Error::Unsupported(
            "the XY representation has an irrational initial vector; propagate Kuo or NonSymmetricD2".into(),
        ));
    }
    Ok(())
}

/// Applies one local gate on sites (j, j+1), j 1-based, in place.
fn apply_local<S: Scalar>(values: &mut [S], j: usize, gate: &LocalGate<S>) {
    let quarter = 1usize << (j - 1);
    let chunk = quarter << 2;
    let blocks = values.len() / chunk;
    let update = |block: &mut [S]| {
        let (q0, rest) = block.split_at_mut(quarter);
        let (q1, rest) = rest.split_at_mut(quarter);
        let (q2, q3) = rest.split_at_mut(quarter);
        if blocks >= 64 || quarter < 1024 {
            for (((a, b), c), e) in q0
                .iter_mut()
                .zip(q1.iter_mut())
                .zip(q2.iter_mut())
                .zip(q3.iter_mut())
            {
                gate.apply(a, b, c, e);
            }
        } else {
            q0.par_iter_mut()
                .zip(q1.par_iter_mut())
                .zip(q2.par_iter_mut())
                .zip(q3.par_iter_mut())
                .for_each(|(((a, b), c), e)| gate.apply(a, b, c, e));
        }
    };
    if blocks >= 64 && values.len() >= 1 << 14 {
        values.par_chunks_mut(chunk).for_each(update);
    } else {
        values.chunks_mut(chunk).for_each(update);
    }
}

/// Runs `t` full time steps from the all-ones vector, calling `observe` after each
/// step (and once at t = 0).
pub fn propagate_full_with<S: Scalar>(
    config: &CircuitConfig,
    t: usize,
    rep: Representation,
    mut observe: impl FnMut(&PurityVectorFull<S>),
) -> Result<PurityVectorFull<S>> {
    config.validate()?;
    check_propagatable(rep)?;
    check_full_capacity::<S>(config.n)?;
    let gate = gate_matrix(rep, config.d)?.sparse::<S>();
    let order = config.protocol.gate_order(config.n);
    let mut v = PurityVectorFull {
        n: config.n,
        d: config.d,
        rep,
        t: 0,
        values: vec![S::one(); 1usize << config.n],
    };
    observe(&v);
    for step in 1..=t {
        for &j in &order {
            apply_local(&mut v.values, j, &gate);
        }
        v.t = step;
        observe(&v);
    }
    Ok(v)
}

pub fn propagate_full<S: Scalar>(
    config: &CircuitConfig,
    t: usize,
    rep: Representation,
) -> Result<PurityVectorFull<S>> {
    propagate_full_with(config, t, rep, |_| {})
}

/// Contiguous-cut purities I_k(t), k = 0..=n, for t = 0..=t_max.
pub fn full_cut_series<S: Scalar>(config: &CircuitConfig, t_max: usize) -> Result<Vec<Vec<S>>> {
    let mut out = Vec::with_capacity(t_max + 1);
    propagate_full_with::<S>(config, t_max, Representation::KuoPurity, |v| {
        out.push(
            (0..=v.n)
                .map(|k| v.values[full_mask(k) as usize].clone())
                .collect(),
        );
    })?;
    Ok(out)
}

fn check_same_n<S>(vector: &PurityVectorFull<S>, b: &Bipartition) -> Result<()> {
    if vector.n != b.n() {
        return Err(Error::Domain(format!(
            "bipartition for n = {} applied to a vector with n = {}",
            b.n(),
            vector.n
        )));
    }
    Ok(())
}

/// Direct read of the Kuo-basis component.
pub fn extract_purity<S: Scalar>(vector: &PurityVectorFull<S>, b: &Bipartition) -> Result<S> {
    check_same_n(vector, b)?;
    if vector.rep != Representation::KuoPurity {
        return Err(Error::Domain(format!(
            "extract_purity needs the KuoPurity representation, got {:?}",
            vector.rep
        )));
    }
    Ok(vector.values[b.mask() as usize].clone())
}

/// Purity from NonSymmetricD2 coefficients: 2^{-w} times the sum over masks inside A.
pub fn extract_from_coefficients<S: Scalar>(x: &PurityVectorFull<S>, b: &Bipartition) -> Result<S> {
    check_same_n(x, b)?;
    if x.rep != Representation::NonSymmetricD2 {
        return Err(Error::Domain(format!(
            "extract_from_coefficients needs NonSymmetricD2, got {:?}",
            x.rep
        )));
    }
    let a = b.mask();
    let mut sum = x.values[0].clone();
    let mut sub = a;
    while sub != 0 {
        sum = sum + x.values[sub as usize].clone();
        sub = (sub - 1) & a;
    }
    let scale = Rational::new(BigInt::one(), Pow::pow(BigInt::from(x.d), b.weight()));
    Ok(sum * S::from_rational(&scale))
}

pub fn steady_state_vector<S: Scalar>(
    n: usize,
    d: u32,
    rep: Representation,
) -> Result<PurityVectorFull<S>> {
    check_dimension(d)?;
    check_full_capacity::<S>(n)?;
    let values = match rep {
        Representation::KuoPurity => {
            let by_weight: Vec<S> = (0..=n)
                .map(|w| lubkin_purity(d, n, w).map(|q| S::from_rational(&q)))
                .collect::<Result<_>>()?;
            (0..1u64 << n)
                .map(|s| by_weight[s.count_ones() as usize].clone())
                .collect()
        }
        Representation::NonSymmetricD2 => {
            require_qubits(rep, d)?;
            let two = BigInt::from(2);
            let base = Rational::new(
                Pow::pow(&two, n) - 1u32,
                Pow::pow(BigInt::from(4), n) - 1u32,
            );
            let by_weight: Vec<S> = (0..=n)
                .map(|w| S::from_rational(&(&base * Rational::from(Pow::pow(BigInt::from(3), w)))))
                .collect();
            (0..1u64 << n)
                .map(|s| {
                    if s == 0 {
                        S::one()
                    } else {
                        by_weight[s.count_ones() as usize].clone()
                    }
                })
                .collect()
        }
        Representation::SymmetricXyD2 => {
            return Err(Error::Unsupported(
                "steady state of the XY representation is irrational".into(),
            ))
        }
    };
    Ok(PurityVectorFull {
        n,
        d,
        rep,
        t: usize::MAX,
        values,
    })
}

/// Explicit 2^n × 2^n transfer matrix of one time step, for cross-checks at small n.
pub fn full_transfer_matrix(
    n: usize,
    d: u32,
    protocol: Protocol,
    rep: Representation,
) -> Result<RationalMatrix> {
    if n > 6 {
        return Err(Error::Capacity(format!(
            "explicit transfer matrix limited to n <= 6, got {n}"
        )));
    }
    if n < 2 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let g = gate_matrix(rep, d)?;
    let dim = 1usize << n;
    let mut total = RationalMatrix::identity(dim);
    for j in protocol.gate_order(n) {
        let lo = j - 1;
        let local = RationalMatrix::from_fn(dim, dim, |r, c| {
            let spectator = !(3usize << lo);
            if r & spectator != c & spectator {
                return Rational::zero();
            }
            g.entries[(r >> lo) & 3][(c >> lo) & 3].clone()
        });
        total = local.mul(&total);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelCensus {
    pub n: usize,
    pub d: u32,
    /// Jordan block size -> number of blocks for eigenvalue 0.
    pub blocks: BTreeMap<usize, usize>,
    pub algebraic: usize,
    pub geometric: usize,
    pub nonzero_eigenvalues: usize,
    /// rank(M_even^p) for p = 0, 1, ... until it stabilizes.
    pub ranks: Vec<usize>,
}

/// Jordan structure of the zero eigenvalue of the staircase M restricted to
/// complement-symmetric vectors, by exact ranks of its powers.
pub fn even_sector_kernel_census(n: usize, d: u32) -> Result<KernelCensus> {
    check_dimension(d)?;
    require_even(n)?;
    if !(2..=12).contains(&n) {
        return Err(Error::Capacity(format!(
            "kernel census is limited to 2 <= n <= 12, got {n}"
        )));
    }
    let dim = 1usize << (n - 1);
    let full = (1usize << n) - 1;
    // (d²+1)·M has integer entries.
    let diag = BigInt::from(d * d + 1);
    let off = BigInt::from(d);
    let order = Protocol::Staircase.gate_order(n);

    let apply = |v: &[BigInt]| -> Vec<BigInt> {
        let mut f: Vec<BigInt> = (0..=full)
            .map(|s| {
                if s < dim {
                    v[s].clone()
                } else {
                    v[full ^ s].clone()
                }
            })
            .collect();
        for &j in &order {
            let lo = j - 1;
            for s in 0..=full {
                if (s >> lo) & 3 != 0 {
                    continue;
                }
                let i0 = s;
                let i3 = s | (3 << lo);
                let x0 = std::mem::take(&mut f[i0]);
                let x3 = std::mem::take(&mut f[i3]);
                let mid = &off * (&x0 + &x3);
                f[s | (1 << lo)] = mid.clone();
                f[s | (2 << lo)] = mid;
                f[i0] = &diag * x0;
                f[i3] = &diag * x3;
            }
        }
        f.truncate(dim);
        f
    };

    let mut ranks = vec![dim];
    let mut basis: Vec<Vec<BigInt>> = (0..dim)
        .map(|b| {
            let mut e = vec![BigInt::zero(); dim];
            e[b] = BigInt::one();
            e
        })
        .collect();
    loop {
        let images: Vec<Vec<BigInt>> = basis.par_iter().map(|v| apply(v)).collect();
        basis = integer_row_basis(images);
        let r = basis.len();
        let prev = *ranks.last().unwrap_or(&dim);
        ranks.push(r);
        if r == prev || r == 0 {
            break;
        }
    }
    let stable = *ranks.last().unwrap_or(&0);
    let ge: Vec<usize> = ranks.windows(2).map(|w| w[0] - w[1]).collect();
    let mut blocks = BTreeMap::new();
    for p in 1..=ge.len() {
        let here = ge[p - 1];
        let next = ge.get(p).copied().unwrap_or(0);
        if here > next {
            blocks.insert(p, here - next);
        }
    }
    Ok(KernelCensus {
        n,
        d,
        algebraic: dim - stable,
        geometric: dim - ranks[1],
        nonzero_eigenvalues: stable,
        blocks,
        ranks,
    })
}
