//! Dry-run capacity and consistency checks.

use purity_core::haar_sim::MAX_STATE_AMPLITUDES;
use purity_core::spectra::MAX_PSEUDOSPECTRUM_SITES;
use purity_core::toeplitz::{reduced_cuts, MAX_SPECTRAL_SITES};
use purity_core::{NumericMode, Protocol, Scalar};
use serde::Serialize;

use crate::spec::{Experiment, ExperimentSpec};

pub const MAX_EIGENVECTOR_SITES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Ok,
    Refused,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuntimeClass {
    Instant,
    Seconds,
    Minutes,
    Hours,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub item: String,
    pub verdict: Verdict,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub experiment: String,
    pub checks: Vec<Check>,
    pub memory_bytes: f64,
    pub runtime_class: RuntimeClass,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Ok)
    }

    pub fn problems(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.verdict != Verdict::Ok)
            .map(|c| format!("{}: {}", c.item, c.message))
            .collect()
    }
}

struct Builder {
    checks: Vec<Check>,
    memory: f64,
    work: f64,
}

impl Builder {
    fn push(&mut self, item: &str, verdict: Verdict, message: impl Into<String>) {
        self.checks.push(Check { item: item.into(), verdict, message: message.into() });
    }

    fn ok(&mut self, item: &str, message: impl Into<String>) {
        self.push(item, Verdict::Ok, message);
    }

    fn require(&mut self, item: &str, cond: bool, verdict: Verdict, message: impl Into<String>) {
        if !cond {
            self.push(item, verdict, message);
        }
    }
}

pub fn amplitudes(d: u32, n: usize) -> f64 {
    (d as f64).powi(n as i32)
}

pub fn mc_feasible(d: u32, n: usize) -> bool {
    amplitudes(d, n) <= MAX_STATE_AMPLITUDES as f64
}

fn check_mc(b: &mut Builder, d: u32, n: usize, t: usize, cuts: usize, r: usize) {
    let amps = amplitudes(d, n);
    if !mc_feasible(d, n) {
        b.push(
            "monte-carlo",
            Verdict::Refused,
            format!("{d}^{n} = {amps:.3e} amplitudes exceed the state-vector limit of {MAX_STATE_AMPLITUDES}"),
        );
        return;
    }
    b.memory = b.memory.max(48.0 * amps);
    let gates = (t * n) as f64 * amps * (d * d) as f64;
    let gram = (cuts * (t + 1)) as f64 * amps * amps.sqrt();
    b.work += 8.0 * r as f64 * (gates + gram);
    b.ok("monte-carlo", format!("{r} realization(s) of {amps:.0} amplitudes"));
}

fn check_closed(b: &mut Builder, n: usize) {
    b.require(
        "closed-spectrum",
        n.is_multiple_of(2) && n >= 4,
        Verdict::Unsupported,
        format!("closed spectrum needs an even n >= 4, got n = {n}"),
    );
}

fn check_staircase_only(b: &mut Builder, e: Experiment, protocol: Protocol) {
    b.require(
        "protocol",
        protocol == Protocol::Staircase,
        Verdict::Unsupported,
        format!("{e} analyzes the staircase Toeplitz matrix; protocol {protocol} is not supported"),
    );
}

fn check_protocol_n(b: &mut Builder, protocol: Protocol, n: usize) {
    if protocol == Protocol::BrickWall {
        b.require(
            "protocol",
            n.is_multiple_of(2) && n >= 4,
            Verdict::Unsupported,
            format!("brick-wall reduction needs an even n >= 4, got n = {n}"),
        );
    }
}

fn check_cut(b: &mut Builder, n: usize, protocol: Protocol, k: usize) {
    b.require(
        "cuts",
        reduced_cuts(n, protocol).contains(&k),
        Verdict::Refused,
        format!("cut k = {k} is not tracked for n = {n} with protocol {protocol}"),
    );
}

/// Names the capacity limit or unsupported combination that a run would hit,
/// without computing anything.
pub fn validate(spec: &ExperimentSpec) -> anyhow::Result<ValidationReport> {
    let s = spec.resolved()?;
    let e = s.experiment()?;
    let d = s.d.unwrap_or(3);
    let protocol = s.protocol();
    let mut b = Builder { checks: Vec::new(), memory: 0.0, work: 0.0 };

    b.require("d", d >= 2, Verdict::Refused, format!("d must be >= 2, got {d}"));
    if let Some(n) = s.n {
        b.require("n", n >= 2, Verdict::Refused, format!("n must be >= 2, got {n}"));
    }
    if s.mode() == NumericMode::Rational && !e.supports_rational() {
        b.push("mode", Verdict::Unsupported, format!("{e} has no rational mode"));
    }
    if s.realizations == Some(0) {
        b.push("realizations", Verdict::Refused, "need at least one realization");
    }
    if d < 2 || s.n.is_some_and(|n| n < 2) {
        return Ok(finish(e, b));
    }

    match e {
        Experiment::Fig1 => {
            let n = s.n.unwrap_or(20);
            let t = s.t_max.unwrap_or(40);
            check_protocol_n(&mut b, protocol, n);
            let k = s.cuts.as_ref().and_then(|c| c.first().copied()).unwrap_or(n / 2);
            check_cut(&mut b, n, protocol, k);
            b.work += (t * n) as f64 * 10.0;
            if s.realizations.is_some() || mc_feasible(d, n) {
                check_mc(&mut b, d, n, t, 1, s.realizations.unwrap_or(1));
            } else {
                b.ok(
                    "monte-carlo",
                    format!("skipped: {d}^{n} amplitudes exceed the limit of {MAX_STATE_AMPLITUDES}"),
                );
            }
        }
        Experiment::Fig3 => {
            let n = s.n.unwrap_or(40);
            check_staircase_only(&mut b, e, protocol);
            check_closed(&mut b, n);
            b.require(
                "n",
                n <= MAX_EIGENVECTOR_SITES,
                Verdict::Refused,
                format!("eigenvector tables are limited to n <= {MAX_EIGENVECTOR_SITES}"),
            );
            b.work += 64.0 * n as f64;
        }
        Experiment::Fig4a => {
            let n = s.n.unwrap_or(20);
            check_staircase_only(&mut b, e, protocol);
            check_closed(&mut b, n);
        }
        Experiment::Fig4b | Experiment::Fig4c => {
            check_staircase_only(&mut b, e, protocol);
            let ns = fig4_sizes(&s);
            let trials = s.trials.unwrap_or(1);
            let eps = s.epsilon.clone().unwrap_or_default();
            b.require("epsilon", !eps.is_empty(), Verdict::Refused, "need at least one ε");
            b.require(
                "epsilon",
                eps.iter().all(|x| *x > 0.0 && x.is_finite()),
                Verdict::Refused,
                "ε must be positive and finite",
            );
            b.require("trials", trials >= 1, Verdict::Refused, "need at least one trial");
            if e == Experiment::Fig4c {
                check_closed(&mut b, ns[0]);
            }
            for &n in &ns {
                b.require(
                    "n",
                    (3..=MAX_PSEUDOSPECTRUM_SITES).contains(&n),
                    Verdict::Refused,
                    format!("dense eigenvalues need 3 <= n <= {MAX_PSEUDOSPECTRUM_SITES}, got {n}"),
                );
                let m = n as f64;
                b.memory = b.memory.max(16.0 * m * m);
                b.work += 25.0 * m * m * m * (trials * eps.len()) as f64;
            }
        }
        Experiment::LambdaEff => {
            for n in s.n.map_or(vec![20, 40, 80], |n| vec![n]) {
                check_closed(&mut b, n);
                check_protocol_n(&mut b, protocol, n);
                let ks = s.cuts.clone().unwrap_or_else(|| vec![n / 2]);
                for k in ks {
                    check_cut(&mut b, n, protocol, k);
                }
                b.work += (s.t_max.unwrap_or(6 * n) * n) as f64 * 4.0;
            }
        }
        Experiment::PurityD234 => {
            let n = s.n.unwrap_or(20);
            check_closed(&mut b, n);
            check_protocol_n(&mut b, protocol, n);
            check_cut(&mut b, n, protocol, n / 2);
            let t = s.t_max.unwrap_or(3 * n);
            let per = if s.mode() == NumericMode::Rational { 1e3 * t as f64 } else { 4.0 };
            b.work += 3.0 * (t * n) as f64 * per;
        }
        Experiment::JordanWindow => {
            let n = s.n.unwrap_or(20);
            check_staircase_only(&mut b, e, protocol);
            check_closed(&mut b, n);
            b.require(
                "n",
                (8..=MAX_SPECTRAL_SITES).contains(&n),
                Verdict::Refused,
                format!("spectral propagation needs 8 <= n <= {MAX_SPECTRAL_SITES}, got {n}"),
            );
            b.work += 1e3 * (n * n) as f64;
        }
        Experiment::Sweep => {
            let n = s.n.unwrap_or(20);
            let t = s.t_max.unwrap_or(10);
            check_protocol_n(&mut b, protocol, n);
            let cuts = s.cuts.clone().unwrap_or_else(|| reduced_cuts(n, protocol));
            b.require("cuts", !cuts.is_empty(), Verdict::Refused, "no cuts to report");
            b.require(
                "cuts",
                cuts.iter().all(|&k| k <= n),
                Verdict::Refused,
                format!("cuts must lie in 0..={n}"),
            );
            let tracked = reduced_cuts(n, protocol);
            if cuts.iter().all(|k| tracked.contains(k)) {
                let per = if s.mode() == NumericMode::Rational { 1e3 * t as f64 } else { 4.0 };
                b.work += (t * n) as f64 * per;
            } else {
                let limit = match s.mode() {
                    NumericMode::Float => <f64 as Scalar>::MAX_FULL_SITES,
                    NumericMode::Rational => <purity_core::Rational as Scalar>::MAX_FULL_SITES,
                };
                b.require(
                    "cuts",
                    n <= limit,
                    Verdict::Refused,
                    format!(
                        "cuts outside the reduced set need the full 2^n vector, limited to n <= {limit} in {} mode",
                        s.mode()
                    ),
                );
                b.memory = b.memory.max(8.0 * 2f64.powi(n as i32));
                b.work += (t * n) as f64 * 2f64.powi(n as i32) * 8.0;
            }
            if let Some(r) = s.realizations {
                check_mc(&mut b, d, n, t, cuts.len(), r);
            }
        }
    }
    Ok(finish(e, b))
}

pub fn fig4_sizes(s: &ExperimentSpec) -> Vec<usize> {
    match (s.experiment, s.n) {
        (_, Some(n)) => vec![n],
        (Some(Experiment::Fig4b), None) => vec![20, 100, 500],
        _ => vec![20],
    }
}

fn finish(e: Experiment, b: Builder) -> ValidationReport {
    let runtime_class = match b.work {
        w if w < 1e8 => RuntimeClass::Instant,
        w if w < 1e11 => RuntimeClass::Seconds,
        w if w < 1e13 => RuntimeClass::Minutes,
        _ => RuntimeClass::Hours,
    };
    ValidationReport { experiment: e.id().into(), checks: b.checks, memory_bytes: b.memory, runtime_class }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: Experiment) -> ExperimentSpec {
        ExperimentSpec { experiment: Some(e), ..Default::default() }
    }

    #[test]
    fn mc_refusal_names_the_limit() {
        let s = ExperimentSpec { d: Some(3), n: Some(40), realizations: Some(10), ..spec(Experiment::Sweep) };
        let r = validate(&s).unwrap();
        assert!(!r.ok());
        assert!(r.problems().iter().any(|p| p.contains("3^40")));
    }

    #[test]
    fn brickwall_odd_unsupported() {
        let s = ExperimentSpec { n: Some(21), protocol: Some(Protocol::BrickWall), ..spec(Experiment::LambdaEff) };
        let r = validate(&s).unwrap();
        assert!(r.checks.iter().any(|c| c.verdict == Verdict::Unsupported));
    }

    #[test]
    fn default_fig1_is_fine() {
        let r = validate(&spec(Experiment::Fig1)).unwrap();
        assert!(r.ok(), "{:?}", r.problems());
        assert!(r.checks.iter().any(|c| c.message.starts_with("skipped")));
    }

    #[test]
    fn fig1_explicit_mc_refused_when_too_large() {
        let s = ExperimentSpec { realizations: Some(1), ..spec(Experiment::Fig1) };
        assert!(!validate(&s).unwrap().ok());
    }

    #[test]
    fn rational_mode_support() {
        let s = ExperimentSpec { mode: Some(NumericMode::Rational), ..spec(Experiment::Fig3) };
        assert!(!validate(&s).unwrap().ok());
        let s = ExperimentSpec { mode: Some(NumericMode::Rational), ..spec(Experiment::Sweep) };
        assert!(validate(&s).unwrap().ok());
    }

    #[test]
    fn every_default_validates() {
        for e in Experiment::ALL {
            let r = validate(&spec(e)).unwrap();
            assert!(r.ok(), "{e}: {:?}", r.problems());
        }
    }
}
