//! Experiment specification: a JSON config file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use purity_core::{GatePolicy, NumericMode, Protocol};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig1,
    Fig3,
    Fig4a,
    Fig4b,
    Fig4c,
    LambdaEff,
    PurityD234,
    JordanWindow,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig1,
        Experiment::Fig3,
        Experiment::Fig4a,
        Experiment::Fig4b,
        Experiment::Fig4c,
        Experiment::LambdaEff,
        Experiment::PurityD234,
        Experiment::JordanWindow,
        Experiment::Sweep,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4a => "fig4a",
            Experiment::Fig4b => "fig4b",
            Experiment::Fig4c => "fig4c",
            Experiment::LambdaEff => "lambda-eff",
            Experiment::PurityD234 => "purity-d234",
            Experiment::JordanWindow => "jordan-window",
            Experiment::Sweep => "sweep",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Fig1 => "half-cut purity: single-circuit Monte Carlo, exact average, phantom and λ2 decay",
            Experiment::Fig3 => "eigenvector localization of T and angle(R_1, R_j) against n",
            Experiment::Fig4a => "symbol curve a(e^{iθ}) and the finite-n spectrum of T",
            Experiment::Fig4b => "eigenvalues of T + εE for several n",
            Experiment::Fig4c => "eigenvalues of T + εE for several ε at fixed n",
            Experiment::LambdaEff => "effective decay rate of I_{n/2}(t) - I_{n/2}(∞) and the transition time",
            Experiment::PurityD234 => "half-cut purity for d = 2, 3, 4 with phantom and λ2 references",
            Experiment::JordanWindow => "exact purity against the spectral sum without the Jordan kernel",
            Experiment::Sweep => "purity for every requested cut and time, optional Monte Carlo columns",
        }
    }

    pub fn columns(self) -> &'static [(&'static str, &'static [&'static str])] {
        match self {
            Experiment::Fig1 => {
                &[("purity", &["t", "I_mc_single", "I_mc_stderr", "I_exact", "phantom", "lambda2_asymptote"])]
            }
            Experiment::Fig3 => &[
                ("eigenvectors", &["j", "k", "R", "L"]),
                ("angles", &["n", "j", "angle"]),
            ],
            Experiment::Fig4a => &[
                ("symbol", &["theta", "re", "im"]),
                ("spectrum", &["j", "re", "im", "multiplicity"]),
            ],
            Experiment::Fig4b => &[
                ("cloud", &["n", "epsilon", "trial", "re", "im", "perturbation_norm"]),
                ("symbol", &["theta", "re", "im"]),
            ],
            Experiment::Fig4c => &[
                ("cloud", &["n", "epsilon", "trial", "re", "im", "perturbation_norm"]),
                ("spectrum", &["j", "re", "im", "multiplicity"]),
            ],
            Experiment::LambdaEff => &[
                ("rates", &["n", "k", "t", "lambda_eff"]),
                ("transition", &["n", "k", "lambda_ph", "lambda2", "t_star"]),
            ],
            Experiment::PurityD234 => &[("purity", &["d", "t", "I", "I_minus_inf", "phantom", "lambda2_power"])],
            Experiment::JordanWindow => &[(
                "purity",
                &["t", "I_exact", "I_spectral_only", "I_quarter_cut", "I_quarter_spectral_only"],
            )],
            Experiment::Sweep => &[("purity", &["t", "k", "I", "I_mc", "I_mc_stderr"])],
        }
    }

    pub fn supports_rational(self) -> bool {
        matches!(self, Experiment::Sweep | Experiment::PurityD234)
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Every field is optional so a config file and the flags can each supply part
/// of it; unset fields fall back to per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: Option<Experiment>,
    pub d: Option<u32>,
    pub n: Option<usize>,
    pub protocol: Option<Protocol>,
    pub gate_policy: Option<GatePolicy>,
    pub t_max: Option<usize>,
    pub seed: Option<u64>,
    pub cuts: Option<Vec<usize>>,
    pub realizations: Option<usize>,
    pub epsilon: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub mode: Option<NumericMode>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` win.
    pub fn merged(self, over: ExperimentSpec) -> Self {
        ExperimentSpec {
            experiment: over.experiment.or(self.experiment),
            d: over.d.or(self.d),
            n: over.n.or(self.n),
            protocol: over.protocol.or(self.protocol),
            gate_policy: over.gate_policy.or(self.gate_policy),
            t_max: over.t_max.or(self.t_max),
            seed: over.seed.or(self.seed),
            cuts: over.cuts.or(self.cuts),
            realizations: over.realizations.or(self.realizations),
            epsilon: over.epsilon.or(self.epsilon),
            trials: over.trials.or(self.trials),
            mode: over.mode.or(self.mode),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
        }
    }

    pub fn experiment(&self) -> anyhow::Result<Experiment> {
        self.experiment
            .context("no experiment given; pass one on the command line or set \"experiment\" in the config")
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol.unwrap_or_default()
    }

    pub fn gate_policy(&self) -> GatePolicy {
        self.gate_policy.unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn mode(&self) -> NumericMode {
        self.mode.unwrap_or_default()
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    /// The spec with every default filled in, as recorded in output metadata.
    pub fn resolved(&self) -> anyhow::Result<ExperimentSpec> {
        let e = self.experiment()?;
        let d = self.d.unwrap_or(match e {
            Experiment::JordanWindow => 4,
            _ => 3,
        });
        let n = self.n.or(match e {
            Experiment::Fig4b | Experiment::LambdaEff => None,
            Experiment::Fig3 => Some(40),
            _ => Some(20),
        });
        let t_max = self.t_max.or(match e {
            Experiment::Fig1 => Some(40),
            Experiment::PurityD234 => Some(3 * n.unwrap_or(20)),
            Experiment::JordanWindow => Some(3 * n.unwrap_or(20) / 2),
            Experiment::Sweep => Some(10),
            _ => None,
        });
        let epsilon = self.epsilon.clone().or(match e {
            Experiment::Fig4b => Some(vec![1e-15]),
            Experiment::Fig4c => Some(vec![1e-8, 1e-11, 1e-14]),
            _ => None,
        });
        let trials = self.trials.or(match e {
            Experiment::Fig4b | Experiment::Fig4c => Some(1),
            _ => None,
        });
        Ok(ExperimentSpec {
            experiment: Some(e),
            d: Some(d),
            n,
            protocol: Some(self.protocol()),
            gate_policy: Some(self.gate_policy()),
            t_max,
            seed: Some(self.seed()),
            cuts: self.cuts.clone(),
            realizations: self.realizations,
            epsilon,
            trials,
            mode: Some(self.mode()),
            out: self.out.clone(),
            format: Some(self.format()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: ExperimentSpec =
            serde_json::from_str(r#"{"experiment": "lambda-eff", "d": 2, "n": 40, "protocol": "brick-wall"}"#).unwrap();
        let flags = ExperimentSpec { n: Some(20), ..Default::default() };
        let m = file.merged(flags);
        assert_eq!(m.experiment, Some(Experiment::LambdaEff));
        assert_eq!((m.d, m.n), (Some(2), Some(20)));
        assert_eq!(m.protocol(), Protocol::BrickWall);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"dd": 3}"#).is_err());
    }

    #[test]
    fn ids_match_value_enum() {
        for e in Experiment::ALL {
            assert_eq!(e.to_possible_value().unwrap().get_name(), e.id());
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.id()));
        }
    }

    #[test]
    fn resolved_defaults() {
        let s = ExperimentSpec { experiment: Some(Experiment::Fig1), ..Default::default() };
        let r = s.resolved().unwrap();
        assert_eq!((r.d, r.n, r.t_max), (Some(3), Some(20), Some(40)));
        assert!(ExperimentSpec::default().resolved().is_err());
    }
}
