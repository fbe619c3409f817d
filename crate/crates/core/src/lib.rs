//! Average bipartite purity dynamics of staircase and brick-wall random qudit circuits.

pub mod dd;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod exact;
pub mod haar_sim;
pub mod markov;
pub mod rng;
pub mod scalar;
pub mod spectra;
pub mod toeplitz;

pub use domain::{
    alpha, alpha_f64, contiguous_mask, lubkin_purity, lubkin_purity_f64, rational, to_f64,
    Bipartition, CircuitConfig, GatePolicy, NumericMode, Protocol, Rational,
};
pub use error::{Error, Result};
pub use scalar::Scalar;
