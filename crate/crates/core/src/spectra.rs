//! Toeplitz symbol, spectrum-region membership, pseudospectrum clouds and
//! relaxation-rate extraction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{alpha, alpha_f64, lubkin_purity_f64, Protocol, Rational};
use crate::eigen;
use crate::error::{Error, Result};
use crate::rng::{substream, TAG_PSEUDOSPECTRUM};
use crate::toeplitz::{reduced_cuts, symbol_coefficient, ToeplitzT};

/// λ_ph = α/(1-α) = ‖a‖_∞.
pub fn lambda_phantom(d: u32) -> Result<Rational> {
    let a = alpha(d)?;
    let lph = &a / (Rational::from_integer(1.into()) - &a);
    let dd = i64::from(d);
    let check = Rational::new(dd.into(), (dd * (dd - 1) + 1).into());
    if lph != check {
        return Err(Error::Verification(format!(
            "α/(1-α) = {lph} but d/(d(d-1)+1) = {check}"
        )));
    }
    Ok(lph)
}

/// a(z) = α/z + α²/(1 - αz).
pub fn symbol_eval(z: Complex64, d: u32) -> Result<Complex64> {
    let a = alpha_f64(d)?;
    let den = Complex64::new(1.0, 0.0) - z * a;
    if z.norm() < 1e-300 || den.norm() < 1e-14 {
        return Err(Error::Domain(format!("a(z) has a pole at z = {z}")));
    }
    Ok(a / z + a * a / den)
}

/// Brick-wall symbol α²(z + 2 + 1/z).
pub fn brickwall_symbol_eval(z: Complex64, d: u32) -> Result<Complex64> {
    let a = alpha_f64(d)?;
    if z.norm() < 1e-300 {
        return Err(Error::Domain(
            "brick-wall symbol has a pole at z = 0".into(),
        ));
    }
    Ok((z + 2.0 + z.inv()) * (a * a))
}

/// Fourier coefficient a_k of the symbol.
pub fn symbol_coefficient_exact(k: i64, d: u32) -> Result<Rational> {
    Ok(symbol_coefficient(&alpha(d)?, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolCurve {
    pub d: u32,
    pub grid: usize,
    /// grid + 1 angles from 0 to 2π inclusive.
    pub thetas: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SymbolCurve {
    pub fn sup_norm(&self) -> (f64, f64) {
        self.values
            .iter()
            .zip(&self.thetas)
            .map(|(v, t)| (v.norm(), *t))
            .fold(
                (0.0, 0.0),
                |best, cur| if cur.0 > best.0 { cur } else { best },
            )
    }

    /// (1/N) Σ a(e^{iθ}) e^{-ikθ} over the open grid.
    pub fn fourier_coefficient(&self, k: i64) -> Complex64 {
        let n = self.grid;
        let sum: Complex64 = self.values[..n]
            .iter()
            .zip(&self.thetas)
            .map(|(v, t)| v * Complex64::from_polar(1.0, -(k as f64) * t))
            .sum();
        sum / n as f64
    }
}

pub fn sample_symbol_curve(d: u32, grid: usize) -> Result<SymbolCurve> {
    if grid < 8 {
        return Err(Error::Domain(format!(
            "symbol grid needs at least 8 points, got {grid}"
        )));
    }
    let thetas: Vec<f64> = (0..=grid)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / grid as f64)
        .collect();
    let mut values = thetas
        .iter()
        .map(|t| symbol_eval(Complex64::from_polar(1.0, *t), d))
        .collect::<Result<Vec<_>>>()?;
    values[grid] = values[0];
    Ok(SymbolCurve {
        d,
        grid,
        thetas,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Inside,
    Outside,
    /// Too close to a(S¹) to decide at this grid resolution.
    Boundary,
}

fn winding_segment(
    d: u32,
    z0: Complex64,
    t0: f64,
    t1: f64,
    w0: Complex64,
    w1: Complex64,
    depth: u32,
) -> Result<f64> {
    let step = (w1 / w0).arg();
    if depth < 40 && (step.abs() > std::f64::consts::FRAC_PI_4) {
        let tm = 0.5 * (t0 + t1);
        let wm = symbol_eval(Complex64::from_polar(1.0, tm), d)? - z0;
        return Ok(winding_segment(d, z0, t0, tm, w0, wm, depth + 1)?
            + winding_segment(d, z0, tm, t1, wm, w1, depth + 1)?);
    }
    Ok(step)
}

/// Winding number of a(e^{iθ}) - z0 around 0.
pub fn symbol_winding_number(z0: Complex64, d: u32, grid: usize) -> Result<i64> {
    let curve = sample_symbol_curve(d, grid)?;
    let mut total = 0.0;
    for i in 0..grid {
        let w0 = curve.values[i] - z0;
        let w1 = curve.values[i + 1] - z0;
        if w0.norm() == 0.0 || w1.norm() == 0.0 {
            return Err(Error::Domain(format!(
                "z0 = {z0} lies on the sampled curve"
            )));
        }
        total += winding_segment(d, z0, curve.thetas[i], curve.thetas[i + 1], w0, w1, 0)?;
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// Number of z with |z| < 1 and a(z) = z0, from αz0·z² - z0·z + α = 0.
pub fn symbol_preimages_in_disk(z0: Complex64, d: u32) -> Result<usize> {
    let a = alpha_f64(d)?;
    if z0.norm() == 0.0 {
        return Ok(0);
    }
    let qa = z0 * a;
    let disc = (z0 * z0 - qa * a * 4.0).sqrt();
    let roots = [(z0 + disc) / (qa * 2.0), (z0 - disc) / (qa * 2.0)];
    Ok(roots.iter().filter(|r| r.norm() < 1.0).count())
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Membership in the spectrum of the semi-infinite Toeplitz operator: the curve
/// a(S¹) plus every point it winds around. The winding number is cross-checked by
/// counting preimages of z0 inside the unit disk (the argument principle with
/// the pole at 0 gives winding = preimages - 1).
pub fn symbol_region_membership(z0: Complex64, d: u32, grid: usize) -> Result<Membership> {
    let curve = sample_symbol_curve(d, grid)?;
    let resolution = curve
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0, f64::max);
    let dist = curve
        .values
        .windows(2)
        .map(|w| segment_distance(z0, w[0], w[1]))
        .fold(f64::INFINITY, f64::min);
    if dist <= resolution {
        return Ok(Membership::Boundary);
    }
    let winding = symbol_winding_number(z0, d, grid)?;
    let preimages = symbol_preimages_in_disk(z0, d)?;
    match (winding != 0, preimages as i64 - 1 != 0) {
        (true, true) => Ok(Membership::Inside),
        (false, false) => Ok(Membership::Outside),
        _ => Ok(Membership::Boundary),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub eigenvalues: Vec<Complex64>,
    /// Frobenius norm of εE.
    pub perturbation_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudospectrumCloud {
    pub n: usize,
    pub d: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub trials: Vec<TrialOutcome>,
    pub failures: Vec<(u64, String)>,
}

impl PseudospectrumCloud {
    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.trials
            .iter()
            .flat_map(|t| t.eigenvalues.iter().copied())
    }

    pub fn max_modulus(&self) -> f64 {
        self.points().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub const MAX_PSEUDOSPECTRUM_SITES: usize = 2002;

/// Eigenvalues of T + εE for `trials` independent real Gaussian E.
pub fn pseudospectrum_sample(
    n: usize,
    d: u32,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<PseudospectrumCloud> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!(
            "ε must be positive and finite, got {epsilon}"
        )));
    }
    if n > MAX_PSEUDOSPECTRUM_SITES {
        return Err(Error::Capacity(format!(
            "dense eigenvalues limited to n <= {MAX_PSEUDOSPECTRUM_SITES}, got {n}"
        )));
    }
    let base = ToeplitzT::new(n, d)?.to_f64();
    let m = base.nrows();
    let results: Vec<(u64, Result<TrialOutcome>)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, TAG_PSEUDOSPECTRUM, n as u64, trial);
            let e = DMatrix::<f64>::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
            let perturbation_norm = epsilon * e.norm();
            let out = eigen::eigenvalues(&base + e * epsilon).map(|eigenvalues| TrialOutcome {
                trial,
                eigenvalues,
                perturbation_norm,
            });
            (trial, out)
        })
        .collect();
    let mut cloud = PseudospectrumCloud {
        n,
        d,
        epsilon,
        seed,
        trials: Vec::new(),
        failures: Vec::new(),
    };
    for (trial, r) in results {
        match r {
            Ok(t) => cloud.trials.push(t),
            Err(e) => cloud.failures.push((trial, e.to_string())),
        }
    }
    Ok(cloud)
}

/// sup over `from` of the distance to the nearest point of `to`.
pub fn directed_distance(from: &[Complex64], to: &[Complex64]) -> f64 {
    from.par_iter()
        .map(|p| {
            to.iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    directed_distance(a, b).max(directed_distance(b, a))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSeries {
    pub n: Option<usize>,
    pub d: Option<u32>,
    pub cut: Option<usize>,
    pub subtracted: bool,
    /// Half-integer times t + 1/2.
    pub times: Vec<f64>,
    pub rates: Vec<f64>,
}

pub const RATE_FLOOR: f64 = 1e-300;

/// λ_eff(t+½) = (I(t+1) - c)/(I(t) - c), c = I(∞) if `subtract` else 0; stops
/// where the denominator drops below [`RATE_FLOOR`].
pub fn effective_rate(series: &[f64], i_inf: f64, subtract: bool) -> Result<RateSeries> {
    if series.len() < 2 {
        return Err(Error::Domain(
            "effective rate needs at least two samples".into(),
        ));
    }
    let c = if subtract { i_inf } else { 0.0 };
    let mut times = Vec::new();
    let mut rates = Vec::new();
    for (t, w) in series.windows(2).enumerate() {
        let den = w[0] - c;
        if den.abs() < RATE_FLOOR {
            break;
        }
        times.push(t as f64 + 0.5);
        rates.push((w[1] - c) / den);
    }
    Ok(RateSeries {
        n: None,
        d: None,
        cut: None,
        subtracted: subtract,
        times,
        rates,
    })
}

struct Deviation {
    idx: usize,
    a: f64,
    protocol: Protocol,
    values: Vec<f64>,
}

impl Deviation {
    /// D(0) = 1 - I(∞) on the tracked cuts.
    fn new(n: usize, d: u32, k: usize, protocol: Protocol) -> Result<Self> {
        let cuts = reduced_cuts(n, protocol);
        let idx = cuts.iter().position(|&c| c == k).ok_or_else(|| {
            Error::Domain(format!(
                "cut k = {k} is not tracked for n = {n}, {protocol}"
            ))
        })?;
        if protocol == Protocol::BrickWall {
            crate::domain::require_even(n)?;
        }
        let values = cuts
            .iter()
            .map(|&c| lubkin_purity_f64(d, n, c).map(|v| 1.0 - v))
            .collect::<Result<_>>()?;
        Ok(Deviation { idx, a: alpha_f64(d)?, protocol, values })
    }

    /// D ↦ T·D.
    fn step(&self) -> Vec<f64> {
        let (a, v) = (self.a, &self.values);
        let a2 = a * a;
        let m = v.len();
        match self.protocol {
            Protocol::Staircase => {
                let mut out = Vec::with_capacity(m);
                let mut running = 0.0;
                for i in 0..m {
                    running = a * running + v[i];
                    let right = if i + 1 < m { v[i + 1] } else { 0.0 };
                    out.push(a2 * running + a * right);
                }
                out
            }
            Protocol::BrickWall => (0..m)
                .map(|i| {
                    let l = if i > 0 { v[i - 1] } else { 0.0 };
                    let r = if i + 1 < m { v[i + 1] } else { 0.0 };
                    a2 * (l + 2.0 * v[i] + r)
                })
                .collect(),
        }
    }
}

/// I_k(t) - I_k(∞) for t = 0..=t_max without cancellation.
pub fn deviation_series(
    n: usize,
    d: u32,
    k: usize,
    t_max: usize,
    protocol: Protocol,
) -> Result<Vec<f64>> {
    let mut dev = Deviation::new(n, d, k, protocol)?;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(dev.values[dev.idx]);
    for _ in 0..t_max {
        dev.values = dev.step();
        out.push(dev.values[dev.idx]);
    }
    Ok(out)
}

/// Subtracted λ_eff for cut k computed from the deviation D = I - I(∞), which
/// obeys D(t+1) = T·D(t) exactly; D is rescaled each step so it never underflows.
pub fn deviation_rates(
    n: usize,
    d: u32,
    k: usize,
    t_max: usize,
    protocol: Protocol,
) -> Result<RateSeries> {
    let mut dev = Deviation::new(n, d, k, protocol)?;
    let idx = dev.idx;
    let mut times = Vec::with_capacity(t_max);
    let mut rates = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let next = dev.step();
        if dev.values[idx].abs() < RATE_FLOOR {
            break;
        }
        times.push(t as f64 + 0.5);
        rates.push(next[idx] / dev.values[idx]);
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            break;
        }
        dev.values = next.into_iter().map(|v| v / scale).collect();
    }
    Ok(RateSeries {
        n: Some(n),
        d: Some(d),
        cut: Some(k),
        subtracted: true,
        times,
        rates,
    })
}

/// First time λ_eff falls below (λ_ph + λ₂)/2 after starting above it, linearly
/// interpolated; None when the series never crosses from above.
pub fn transition_time(rates: &RateSeries, lambda_ph: f64, lambda2: f64) -> Option<f64> {
    let thr = 0.5 * (lambda_ph + lambda2);
    let first = *rates.rates.first()?;
    if first < thr {
        return None;
    }
    let i = rates.rates.iter().position(|&r| r < thr)?;
    let (r0, r1) = (rates.rates[i - 1], rates.rates[i]);
    let (t0, t1) = (rates.times[i - 1], rates.times[i]);
    Some(t0 + (r0 - thr) / (r0 - r1) * (t1 - t0))
}
