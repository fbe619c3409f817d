//! Monte Carlo oracle: Haar-random two-qudit gates acting on pure states.

use matrixmultiply::{zgemm, CGemmOption};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{check_dimension, contiguous_mask, Bipartition, CircuitConfig, GatePolicy};
use crate::error::{check_range, Error, Result};
use crate::rng::{substream, TAG_CIRCUIT};

pub const MAX_STATE_AMPLITUDES: usize = 1 << 22;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn state_len(d: u32, n: usize) -> Result<usize> {
    check_dimension(d)?;
    (d as usize)
        .checked_pow(n as u32)
        .filter(|&len| len <= MAX_STATE_AMPLITUDES)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "state vector of {d}^{n} amplitudes exceeds the limit of {MAX_STATE_AMPLITUDES}"
            ))
        })
}

/// Amplitudes indexed by Σ a_j d^{j-1}: site 1 is the fastest digit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    d: u32,
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0⟩^⊗n.
    pub fn product_zero(d: u32, n: usize) -> Result<Self> {
        let mut amplitudes = vec![ZERO; state_len(d, n)?];
        amplitudes[0] = ONE;
        Ok(StateVector { d, n, amplitudes })
    }

    /// Computational basis state; `digits[j-1]` is the level of site j.
    pub fn basis(d: u32, digits: &[u32]) -> Result<Self> {
        let n = digits.len();
        let mut state = StateVector {
            d,
            n,
            amplitudes: vec![ZERO; state_len(d, n)?],
        };
        let mut idx = 0usize;
        for &a in digits.iter().rev() {
            check_range("digit", a as usize, 0, d as usize - 1)?;
            idx = idx * d as usize + a as usize;
        }
        state.amplitudes[idx] = ONE;
        Ok(state)
    }

    pub fn from_amplitudes(d: u32, n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != state_len(d, n)? {
            return Err(Error::Domain(format!(
                "expected {d}^{n} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let state = StateVector { d, n, amplitudes };
        if (state.norm_sqr() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("state is not normalized".into()));
        }
        Ok(state)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// d²×d² unitary in the local basis a_j + d·a_{j+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQuditGate {
    d: u32,
    matrix: DMatrix<Complex64>,
}

impl TwoQuditGate {
    pub fn new(d: u32, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_dimension(d)?;
        let dim = (d * d) as usize;
        if matrix.shape() != (dim, dim) {
            return Err(Error::Domain(format!("gate must be {dim}x{dim}")));
        }
        let gate = TwoQuditGate { d, matrix };
        if gate.unitarity_defect() > 1e-12 {
            return Err(Error::Domain("gate is not unitary".into()));
        }
        Ok(gate)
    }

    pub fn identity(d: u32) -> Result<Self> {
        let dim = (d * d) as usize;
        Self::new(d, DMatrix::identity(dim, dim))
    }

    pub fn swap(d: u32) -> Result<Self> {
        let du = d as usize;
        let dim = du * du;
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            if r == (c / du) + du * (c % du) {
                ONE
            } else {
                ZERO
            }
        });
        Self::new(d, m)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// ‖U†U - 1‖_F.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(dim, dim)).norm()
    }
}

/// Ginibre matrix, QR, then column phases fixed by r_ii/|r_ii|.
pub fn sample_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DMatrix<Complex64>> {
    if dim < 4 {
        return Err(Error::Domain(format!(
            "Haar gate dimension must be >= 4, got {dim}"
        )));
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (i, mut col) in q.column_iter_mut().enumerate() {
        let rii = r[(i, i)];
        let phase = if rii.norm() > 0.0 {
            rii / rii.norm()
        } else {
            ONE
        };
        col *= phase;
    }
    Ok(q)
}

pub fn sample_haar_gate<R: Rng + ?Sized>(d: u32, rng: &mut R) -> Result<TwoQuditGate> {
    check_dimension(d)?;
    let m = sample_haar_unitary((d * d) as usize, rng)?;
    Ok(TwoQuditGate { d, matrix: m })
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: *const Complex64,
    rsa: usize,
    csa: usize,
    b: *const Complex64,
    rsb: usize,
    csb: usize,
    c: *mut Complex64,
    rsc: usize,
    csc: usize,
) {
    // SAFETY: callers pass pointers into live buffers whose strided extents cover
    // the m×k, k×n and m×n operands; Complex64 is repr(C) {re, im} like [f64; 2].
    unsafe {
        zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.cast(),
            rsa as isize,
            csa as isize,
            b.cast(),
            rsb as isize,
            csb as isize,
            [0.0, 0.0],
            c.cast(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Applies `gate` to sites (j, j+1), 1-based.
pub fn apply_two_site_gate(state: &mut StateVector, gate: &TwoQuditGate, j: usize) -> Result<()> {
    if gate.d != state.d {
        return Err(Error::Domain(format!(
            "gate d = {} but state d = {}",
            gate.d, state.d
        )));
    }
    check_range("gate site j", j, 1, state.n - 1)?;
    let du = state.d as usize;
    let dim = du * du;
    let s = du.pow(j as u32 - 1);
    let high = state.amplitudes.len() / (s * dim);
    let mut out = vec![ZERO; state.amplitudes.len()];
    let u = gate.matrix.as_ptr();
    let x = state.amplitudes.as_ptr();
    let y = out.as_mut_ptr();
    if s >= high {
        for h in 0..high {
            let off = h * s * dim;
            // SAFETY: block h spans [off, off + s·dim) inside both buffers.
            let (xa, ya) = unsafe { (x.add(off), y.add(off)) };
            gemm(dim, dim, s, u, 1, dim, xa, s, 1, ya, s, 1);
        }
    } else {
        for low in 0..s {
            // SAFETY: strided rows start at low < s and stay below the buffer length.
            let (xa, ya) = unsafe { (x.add(low), y.add(low)) };
            gemm(high, dim, dim, xa, s * dim, s, u, dim, 1, ya, s * dim, s);
        }
    }
    state.amplitudes = out;
    Ok(())
}

fn gate_for_slot(config: &CircuitConfig, realization: u64, slot: u64) -> Result<TwoQuditGate> {
    let slot = match config.gate_policy {
        GatePolicy::IidPerGateAndStep => slot,
        GatePolicy::SingleRepeatedGate => 0,
    };
    let mut rng = substream(config.seed, TAG_CIRCUIT, realization, slot);
    sample_haar_gate(config.d, &mut rng)
}

/// Evolves |0⟩^⊗n for `config.t_max` steps, calling `observe(t, state)` at every t
/// including t = 0. Gate slot (t, g) uses its own substream of (seed, realization).
pub fn run_circuit_observed<F>(
    config: &CircuitConfig,
    realization: u64,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &StateVector) -> Result<()>,
{
    config.validate()?;
    let mut state = StateVector::product_zero(config.d, config.n)?;
    observe(0, &state)?;
    let order = config.protocol.gate_order(config.n);
    let single = match config.gate_policy {
        GatePolicy::SingleRepeatedGate => Some(gate_for_slot(config, realization, 0)?),
        GatePolicy::IidPerGateAndStep => None,
    };
    for t in 0..config.t_max {
        for (g, &j) in order.iter().enumerate() {
            let slot = (t * order.len() + g) as u64;
            match &single {
                Some(gate) => apply_two_site_gate(&mut state, gate, j)?,
                None => {
                    apply_two_site_gate(&mut state, &gate_for_slot(config, realization, slot)?, j)?
                }
            }
        }
        observe(t + 1, &state)?;
    }
    Ok(())
}

/// Snapshots at t = 0..=t_max.
pub fn run_circuit(config: &CircuitConfig, realization: u64) -> Result<Vec<StateVector>> {
    let mut snaps = Vec::with_capacity(config.t_max + 1);
    run_circuit_observed(config, realization, |_, s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok(snaps)
}

/// Reorders amplitudes so the sites of `mask` become the fastest digits.
fn group_sites(state: &StateVector, part: &Bipartition) -> Vec<Complex64> {
    let du = state.d as usize;
    let n = state.n;
    let mut place = vec![0usize; n];
    let mut stride = 1usize;
    for (site, p) in place.iter_mut().enumerate() {
        if part.contains(site + 1) {
            *p = stride;
            stride *= du;
        }
    }
    for (site, p) in place.iter_mut().enumerate() {
        if !part.contains(site + 1) {
            *p = stride;
            stride *= du;
        }
    }
    let mut out = vec![ZERO; state.amplitudes.len()];
    let mut digits = vec![0usize; n];
    let mut target = 0usize;
    for amp in &state.amplitudes {
        out[target] = *amp;
        for site in 0..n {
            digits[site] += 1;
            target += place[site];
            if digits[site] < du {
                break;
            }
            digits[site] = 0;
            target -= du * place[site];
        }
    }
    out
}

/// tr ρ_A² via the Gram matrix on the smaller side of the cut.
pub fn purity_of_state(state: &StateVector, part: &Bipartition) -> Result<f64> {
    if part.n() != state.n {
        return Err(Error::Domain(format!(
            "bipartition has n = {} but state has n = {}",
            part.n(),
            state.n
        )));
    }
    let w = part.weight();
    let grouped;
    let psi: &[Complex64] = if part.mask() == (1u64 << w) - 1 {
        &state.amplitudes
    } else {
        grouped = group_sites(state, part);
        &grouped
    };
    let du = state.d as usize;
    let ra = du.pow(w as u32);
    let rb = psi.len() / ra;
    let conj: Vec<Complex64> = psi.iter().map(|z| z.conj()).collect();
    // rows of ψ on the smaller side; element e of row r sits at r·rs + e·es
    let (rows, len, rs, es) = if ra <= rb {
        (ra, rb, 1, ra)
    } else {
        (rb, ra, ra, 1)
    };
    let view = RowView {
        psi,
        conj: &conj,
        len,
        rs,
        es,
    };
    let mut scratch = vec![ZERO; (rows / 2 + 1).pow(2).max(GRAM_LEAF * GRAM_LEAF)];
    Ok(view.gram_frob_sqr(0, rows, &mut scratch))
}

const GRAM_LEAF: usize = 48;

struct RowView<'a> {
    psi: &'a [Complex64],
    conj: &'a [Complex64],
    len: usize,
    rs: usize,
    es: usize,
}

impl RowView<'_> {
    /// ‖G[I, J]‖_F² for G = ψψ†.
    fn block(&self, i0: usize, i1: usize, j0: usize, j1: usize, scratch: &mut [Complex64]) -> f64 {
        let (m, n) = (i1 - i0, j1 - j0);
        let out = &mut scratch[..m * n];
        gemm(
            m,
            self.len,
            n,
            self.psi[i0 * self.rs..].as_ptr(),
            self.rs,
            self.es,
            self.conj[j0 * self.rs..].as_ptr(),
            self.es,
            self.rs,
            out.as_mut_ptr(),
            n,
            1,
        );
        out.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Hermitian G: diagonal blocks recurse, the off-diagonal block counts twice.
    fn gram_frob_sqr(&self, lo: usize, hi: usize, scratch: &mut [Complex64]) -> f64 {
        if hi - lo <= GRAM_LEAF {
            return self.block(lo, hi, lo, hi, scratch);
        }
        let mid = lo + (hi - lo) / 2;
        self.gram_frob_sqr(lo, mid, scratch)
            + self.gram_frob_sqr(mid, hi, scratch)
            + 2.0 * self.block(lo, mid, mid, hi, scratch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PuritySeries {
    pub d: u32,
    pub n: usize,
    pub cuts: Vec<usize>,
    pub realizations: usize,
    /// mean[t][c] for cut `cuts[c]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl PuritySeries {
    pub fn get(&self, t: usize, k: usize) -> Option<(f64, f64)> {
        let c = self.cuts.iter().position(|&x| x == k)?;
        Some((*self.mean.get(t)?.get(c)?, self.stderr[t][c]))
    }
}

/// Mean and standard error of I_k(t) over R realizations, first-k-site cuts.
pub fn mc_purity_series(
    config: &CircuitConfig,
    cuts: &[usize],
    realizations: usize,
) -> Result<PuritySeries> {
    config.validate()?;
    state_len(config.d, config.n)?;
    if realizations == 0 {
        return Err(Error::Domain("need at least one realization".into()));
    }
    let parts = cuts
        .iter()
        .map(|&k| contiguous_mask(config.n, k))
        .collect::<Result<Vec<_>>>()?;
    let per_run: Vec<Vec<Vec<f64>>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rows = Vec::with_capacity(config.t_max + 1);
            run_circuit_observed(config, r, |_, state| {
                rows.push(
                    parts
                        .iter()
                        .map(|p| purity_of_state(state, p))
                        .collect::<Result<Vec<_>>>()?,
                );
                Ok(())
            })?;
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let steps = config.t_max + 1;
    let mut mean = vec![vec![0.0; cuts.len()]; steps];
    let mut stderr = vec![vec![0.0; cuts.len()]; steps];
    let rf = realizations as f64;
    for t in 0..steps {
        for c in 0..cuts.len() {
            let m = per_run.iter().map(|run| run[t][c]).sum::<f64>() / rf;
            mean[t][c] = m;
            if realizations > 1 {
                let var = per_run
                    .iter()
                    .map(|run| (run[t][c] - m).powi(2))
                    .sum::<f64>()
                    / (rf - 1.0);
                stderr[t][c] = (var / rf).sqrt();
            }
        }
    }
    Ok(PuritySeries {
        d: config.d,
        n: config.n,
        cuts: cuts.to_vec(),
        realizations,
        mean,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Protocol;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: u32, n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = (d as usize).pow(n as u32);
        let mut v: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        StateVector::from_amplitudes(d, n, v).unwrap()
    }

    fn mean_and_err(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn haar_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [4, 9, 16] {
            let u = sample_haar_unitary(dim, &mut rng).unwrap();
            let defect = (u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim)).norm();
            assert!(defect < 1e-12);
            assert!((u.column(0).norm() - 1.0).abs() < 1e-12);
        }
        assert!(sample_haar_unitary(3, &mut rng).is_err());
    }

    #[test]
    fn haar_entry_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_haar_unitary(4, &mut rng).unwrap()[(0, 0)].norm_sqr())
            .collect();
        let (m, e) = mean_and_err(&xs);
        assert!((m - 0.25).abs() < 3.0 * e, "{m} ± {e}");
        // phases of the diagonal are uniform, so E[U00] = 0
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let re: Vec<f64> = (0..10_000)
            .map(|_| sample_haar_unitary(4, &mut rng).unwrap()[(0, 0)].re)
            .collect();
        let (m, e) = mean_and_err(&re);
        assert!(m.abs() < 3.0 * e);
    }

    #[test]
    fn identity_and_swap() {
        let s = random_state(3, 4, 5);
        let mut t = s.clone();
        apply_two_site_gate(&mut t, &TwoQuditGate::identity(3).unwrap(), 2).unwrap();
        assert_eq!(s, t);

        for d in [2u32, 3] {
            let mut st = StateVector::basis(d, &[0, 1, 0, 0]).unwrap();
            apply_two_site_gate(&mut st, &TwoQuditGate::swap(d).unwrap(), 1).unwrap();
            assert_eq!(st, StateVector::basis(d, &[1, 0, 0, 0]).unwrap());
            let mut st = StateVector::basis(d, &[0, 0, 1, 0]).unwrap();
            apply_two_site_gate(&mut st, &TwoQuditGate::swap(d).unwrap(), 3).unwrap();
            assert_eq!(st, StateVector::basis(d, &[0, 0, 0, 1]).unwrap());
        }
        let mut st = StateVector::product_zero(2, 3).unwrap();
        assert!(apply_two_site_gate(&mut st, &TwoQuditGate::identity(2).unwrap(), 0).is_err());
        assert!(apply_two_site_gate(&mut st, &TwoQuditGate::identity(2).unwrap(), 3).is_err());
        assert!(apply_two_site_gate(&mut st, &TwoQuditGate::identity(3).unwrap(), 1).is_err());
    }

    #[test]
    fn gate_matches_dense_kron() {
        // compare against an explicit d^n × d^n operator 1 ⊗ U ⊗ 1
        let (d, n, j) = (2u32, 4usize, 2usize);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gate = sample_haar_gate(d, &mut rng).unwrap();
        let s = random_state(d, n, 9);
        let mut fast = s.clone();
        apply_two_site_gate(&mut fast, &gate, j).unwrap();
        let du = d as usize;
        let len = s.amplitudes.len();
        let digit = |i: usize, site: usize| (i / du.pow(site as u32 - 1)) % du;
        for out in 0..len {
            let mut acc = ZERO;
            for inp in 0..len {
                let same = (1..=n)
                    .filter(|&q| q != j && q != j + 1)
                    .all(|q| digit(out, q) == digit(inp, q));
                if same {
                    let r = digit(out, j) + du * digit(out, j + 1);
                    let c = digit(inp, j) + du * digit(inp, j + 1);
                    acc += gate.matrix[(r, c)] * s.amplitudes[inp];
                }
            }
            assert!((acc - fast.amplitudes[out]).norm() < 1e-14);
        }
    }

    #[test]
    fn norm_is_preserved() {
        let config = CircuitConfig::new(3, 6).unwrap().with_t_max(5).with_seed(4);
        run_circuit_observed(&config, 0, |_, s| {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn circuit_gate_order() {
        for protocol in [Protocol::Staircase, Protocol::BrickWall] {
            let config = CircuitConfig::new(2, 4)
                .unwrap()
                .with_protocol(protocol)
                .with_t_max(1)
                .with_seed(11);
            let snaps = run_circuit(&config, 3).unwrap();
            let mut manual = StateVector::product_zero(2, 4).unwrap();
            for (g, &j) in protocol.gate_order(4).iter().enumerate() {
                let gate = gate_for_slot(&config, 3, g as u64).unwrap();
                apply_two_site_gate(&mut manual, &gate, j).unwrap();
            }
            assert_eq!(snaps[1], manual);
        }
        assert_eq!(Protocol::Staircase.gate_order(4), vec![1, 2, 3]);
        assert_eq!(Protocol::BrickWall.gate_order(4), vec![1, 3, 2]);
    }

    #[test]
    fn two_sites_one_step() {
        let config = CircuitConfig::new(3, 2).unwrap().with_t_max(1).with_seed(5);
        let snaps = run_circuit(&config, 0).unwrap();
        let u = gate_for_slot(&config, 0, 0).unwrap();
        let col: Vec<Complex64> = u.matrix.column(0).iter().copied().collect();
        assert_eq!(snaps[1].amplitudes, col);
    }

    #[test]
    fn single_policy_reuses_gate() {
        let config = CircuitConfig::new(2, 3)
            .unwrap()
            .with_gate_policy(GatePolicy::SingleRepeatedGate)
            .with_t_max(2)
            .with_seed(6);
        let snaps = run_circuit(&config, 1).unwrap();
        let gate = gate_for_slot(&config, 1, 0).unwrap();
        let mut manual = StateVector::product_zero(2, 3).unwrap();
        for _ in 0..2 {
            for j in [1, 2] {
                apply_two_site_gate(&mut manual, &gate, j).unwrap();
            }
        }
        assert_eq!(snaps[2], manual);
    }

    #[test]
    fn capacity_refusal() {
        assert!(matches!(
            StateVector::product_zero(3, 40),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            StateVector::product_zero(2, 23),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn simple_purities() {
        let s = StateVector::basis(3, &[1, 2, 0, 1]).unwrap();
        for mask in 1..15u64 {
            let p = purity_of_state(&s, &Bipartition::new(4, mask).unwrap()).unwrap();
            assert!((p - 1.0).abs() < 1e-15);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(
            2,
            2,
            vec![Complex64::new(h, 0.0), ZERO, ZERO, Complex64::new(h, 0.0)],
        )
        .unwrap();
        let p = purity_of_state(&bell, &contiguous_mask(2, 1).unwrap()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn purity_matches_naive_density_matrix() {
        let (d, n) = (3u32, 8usize);
        let s = random_state(d, n, 31);
        for (k, mask) in [(5usize, 0b1_1111u64), (4, 0b1010_0101)] {
            let part = Bipartition::new(n, mask).unwrap();
            let ra = 3usize.pow(k as u32);
            let rb = s.amplitudes.len() / ra;
            let grouped = group_sites(&s, &part);
            let mut rho = vec![ZERO; ra * ra];
            for a in 0..ra {
                for a2 in 0..ra {
                    rho[a * ra + a2] = (0..rb)
                        .map(|b| grouped[a + b * ra] * grouped[a2 + b * ra].conj())
                        .sum();
                }
            }
            let naive: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
            let fast = purity_of_state(&s, &part).unwrap();
            assert!((naive - fast).abs() < 1e-13, "{naive} {fast}");
        }
    }

    #[test]
    fn one_gate_average() {
        let config = CircuitConfig::new(2, 2)
            .unwrap()
            .with_t_max(1)
            .with_seed(12);
        let s = mc_purity_series(&config, &[1], 10_000).unwrap();
        let (m, e) = s.get(1, 1).unwrap();
        assert!((m - 0.8).abs() < 3.0 * e, "{m} ± {e}");
        assert_eq!(s.get(0, 1).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn haar_invariance_smoke() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // fixed local unitary on site 1 maps |0> to cos(0.7)|0> + e^{0.3i} sin(0.7)|1>
        let v0 = Complex64::new(0.7f64.cos(), 0.0);
        let v1 = Complex64::from_polar(0.7f64.sin(), 0.3);
        let cut = contiguous_mask(2, 1).unwrap();
        let plain: Vec<f64> = (0..10_000)
            .map(|_| {
                let g = sample_haar_gate(2, &mut rng).unwrap();
                let mut s = StateVector::product_zero(2, 2).unwrap();
                apply_two_site_gate(&mut s, &g, 1).unwrap();
                purity_of_state(&s, &cut).unwrap()
            })
            .collect();
        let rotated: Vec<f64> = (0..10_000)
            .map(|_| {
                let g = sample_haar_gate(2, &mut rng).unwrap();
                let amps = vec![v0, v1, ZERO, ZERO];
                let mut s = StateVector::from_amplitudes(2, 2, amps).unwrap();
                apply_two_site_gate(&mut s, &g, 1).unwrap();
                purity_of_state(&s, &cut).unwrap()
            })
            .collect();
        let (m1, e1) = mean_and_err(&plain);
        let (m2, e2) = mean_and_err(&rotated);
        assert!((m1 - m2).abs() < 3.0 * (e1 * e1 + e2 * e2).sqrt());
    }

    #[test]
    fn deterministic_series() {
        let config = CircuitConfig::new(2, 5)
            .unwrap()
            .with_t_max(3)
            .with_seed(21);
        let a = mc_purity_series(&config, &[1, 2, 3, 4], 20).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| mc_purity_series(&config, &[1, 2, 3, 4], 20).unwrap());
        assert_eq!(a, b);
        let c = mc_purity_series(&config.clone().with_seed(22), &[1, 2, 3, 4], 20).unwrap();
        assert_ne!(a, c);
        assert!(mc_purity_series(&config, &[2], 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn complement_symmetry(d in 2u32..=3, n in 2usize..=6, mask_seed in any::<u64>(), seed in any::<u64>()) {
            let full = (1u64 << n) - 1;
            let mask = 1 + mask_seed % (full - 1);
            let s = random_state(d, n, seed);
            let part = Bipartition::new(n, mask).unwrap();
            let p = purity_of_state(&s, &part).unwrap();
            let q = purity_of_state(&s, &part.complement()).unwrap();
            prop_assert!((p - q).abs() < 1e-12);
            let lo = (d as f64).powi(-(part.weight().min(n - part.weight()) as i32));
            prop_assert!(p >= lo - 1e-12 && p <= 1.0 + 1e-12);
        }
    }
}
