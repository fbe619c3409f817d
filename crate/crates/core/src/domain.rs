//! Shared domain types: circuit configuration, bipartitions, exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Exact rational number backed by arbitrary-precision integers.
pub type Rational = BigRational;

/// Shorthand for building a small rational.
pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Largest site count representable by a [`Bipartition`] mask.
pub const MAX_MASK_SITES: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[default]
    Staircase,
    #[serde(alias = "brick-wall", alias = "brick_wall")]
    BrickWall,
}

impl Protocol {
    /// Gate positions `j` (gate acts on sites j, j+1) applied during one time step.
    pub fn gate_order(self, n: usize) -> Vec<usize> {
        match self {
            Protocol::Staircase => (1..n).collect(),
            Protocol::BrickWall => (1..n).step_by(2).chain((2..n).step_by(2)).collect(),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Staircase => "staircase",
            Protocol::BrickWall => "brickwall",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "staircase" => Ok(Protocol::Staircase),
            "brickwall" | "brick-wall" | "brick_wall" => Ok(Protocol::BrickWall),
            other => Err(Error::Unsupported(format!("protocol '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum GatePolicy {
    /// Fresh Haar gate for every slot of every step.
    #[default]
    #[serde(rename = "iid")]
    IidPerGateAndStep,
    /// One Haar gate drawn at t = 0 and reused everywhere.
    #[serde(rename = "single")]
    SingleRepeatedGate,
}

impl std::fmt::Display for GatePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GatePolicy::IidPerGateAndStep => "iid",
            GatePolicy::SingleRepeatedGate => "single",
        })
    }
}

impl std::str::FromStr for GatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" => Ok(GatePolicy::IidPerGateAndStep),
            "single" => Ok(GatePolicy::SingleRepeatedGate),
            other => Err(Error::Unsupported(format!("gate policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    #[default]
    Float,
    Rational,
}

impl std::fmt::Display for NumericMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NumericMode::Float => "float",
            NumericMode::Rational => "rational",
        })
    }
}

impl std::str::FromStr for NumericMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "float" => Ok(NumericMode::Float),
            "rational" => Ok(NumericMode::Rational),
            other => Err(Error::Unsupported(format!("numeric mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub d: u32,
    pub n: usize,
    pub protocol: Protocol,
    pub gate_policy: GatePolicy,
    pub t_max: usize,
    pub seed: u64,
}

impl CircuitConfig {
    pub fn new(d: u32, n: usize) -> Result<Self> {
        let cfg = CircuitConfig {
            d,
            n,
            protocol: Protocol::Staircase,
            gate_policy: GatePolicy::IidPerGateAndStep,
            t_max: 0,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn with_gate_policy(mut self, policy: GatePolicy) -> Self {
        self.gate_policy = policy;
        self
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension(self.d)?;
        if self.n < 2 {
            return Err(Error::OutOfRange {
                what: "n",
                value: self.n as i64,
                lo: 2,
                hi: i64::MAX,
            });
        }
        Ok(())
    }

    /// Closed-spectrum operations need an even chain.
    pub fn require_even_n(&self) -> Result<()> {
        require_even(self.n)
    }
}

pub(crate) fn check_dimension(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

pub(crate) fn require_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::Unsupported(format!(
            "odd n = {n}: the closed spectrum is only known for even chains"
        )));
    }
    Ok(())
}

/// Subsystem A of a bipartition; bit j-1 set means site j belongs to A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    n: usize,
    mask: u64,
}

impl Bipartition {
    pub fn new(n: usize, mask: u64) -> Result<Self> {
        check_range("n", n, 1, MAX_MASK_SITES)?;
        if mask >> n != 0 {
            return Err(Error::Domain(format!(
                "mask {mask:#b} has bits beyond site {n}"
            )));
        }
        Ok(Bipartition { n, mask })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn weight(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn complement(&self) -> Bipartition {
        Bipartition {
            n: self.n,
            mask: !self.mask & full_mask(self.n),
        }
    }

    pub fn contains(&self, site: usize) -> bool {
        site >= 1 && site <= self.n && self.mask >> (site - 1) & 1 == 1
    }

    /// Returns k when A is the first k sites.
    pub fn contiguous_cut(&self) -> Option<usize> {
        let k = self.weight();
        (self.mask == full_mask(k)).then_some(k)
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn contiguous_mask(n: usize, k: usize) -> Result<Bipartition> {
    check_range("k", k, 0, n)?;
    Bipartition::new(n, full_mask(k))
}

/// α = d / (d² + 1).
pub fn alpha(d: u32) -> Result<Rational> {
    check_dimension(d)?;
    let d = BigInt::from(d);
    Ok(Rational::new(d.clone(), &d * &d + 1))
}

pub fn alpha_f64(d: u32) -> Result<f64> {
    check_dimension(d)?;
    let d = d as f64;
    Ok(d / (d * d + 1.0))
}

/// Purity of a Haar-random pure state for a subsystem of w sites.
pub fn lubkin_purity(d: u32, n: usize, w: usize) -> Result<Rational> {
    check_dimension(d)?;
    check_range("w", w, 0, n)?;
    let db = BigInt::from(d);
    let pow = |e: usize| -> BigInt { Pow::pow(&db, e) };
    Ok(Rational::new(pow(w) + pow(n - w), pow(n) + BigInt::one()))
}

/// Float version of [`lubkin_purity`], safe for chains far too long for f64 powers.
pub fn lubkin_purity_f64(d: u32, n: usize, w: usize) -> Result<f64> {
    check_dimension(d)?;
    check_range("w", w, 0, n)?;
    let inv = 1.0 / d as f64;
    let p = |e: usize| inv.powf(e as f64);
    Ok((p(n - w) + p(w)) / (1.0 + p(n)))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}
