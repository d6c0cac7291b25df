//! TOML experiment configuration. Every field has a default matching the
//! reference experiments, so an empty file is a valid config.

use std::path::PathBuf;

use medclip::geometry::{FeasibleSet, ProxSetup};
use medclip::noise::{NoiseDist, OracleMode, SymmetricDist};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    ZoSstm,
    ZoSmd,
    ZoRestarted,
    ZoSgd,
    Bandit,
    FullFeedback,
}

impl ExperimentKind {
    pub fn is_bandit(self) -> bool {
        matches!(self, ExperimentKind::Bandit | ExperimentKind::FullFeedback)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// 15 for optimisation, 100 for bandits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 uses every available core.
    pub workers: usize,
    /// Trace every n-th iteration (every n-th step for bandits); 100 for
    /// optimisation, 10 for bandits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<usize>,
    /// Oracle-call budget used to derive the iteration count.
    pub oracle_calls: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::ZoSstm,
            runs: None,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            trace_every: None,
            oracle_calls: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `||Ax - b||_2` with Gaussian `A`, `b`.
    LeastSquares,
    /// `b = A x_p`, optimal value 0.
    Planted,
    /// `||A(x - c)||_2 + mu/2 ||x - c||^2`.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Composite for restarts, least squares otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ProblemKind>,
    pub d: usize,
    pub l: usize,
    pub matrix_seed: u64,
    /// Strong convexity of the composite problem.
    pub mu: f64,
    /// Starting point; the origin when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: None,
            d: 16,
            l: 200,
            matrix_seed: 0,
            mu: 2.0,
            x0: None,
        }
    }
}

/// `mode` plus the noise law's own keys, e.g.
/// `type = "symmetric"`, `kind = "stable"`, `alpha = 1.0`, `scale = 1.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    #[serde(default = "lipschitz")]
    pub mode: OracleMode,
    #[serde(flatten)]
    pub dist: NoiseDist,
}

fn lipschitz() -> OracleMode {
    OracleMode::Lipschitz
}

impl NoiseSection {
    /// Levy alpha=1 noise for optimisation, Cauchy(3) for bandits.
    pub fn default_for(kind: ExperimentKind) -> Self {
        if kind.is_bandit() {
            NoiseSection {
                mode: OracleMode::Independent,
                dist: NoiseDist::Symmetric(SymmetricDist::Cauchy { scale: 3.0 }),
            }
        } else {
            NoiseSection {
                mode: OracleMode::Lipschitz,
                dist: NoiseDist::Symmetric(SymmetricDist::Stable {
                    alpha: 1.0,
                    scale: 1.0,
                }),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Stepsizes come from the config (or its defaults).
    Explicit,
    /// Stepsizes come from the convergence theorems.
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// `lambda_k = R / (alpha_{k+1} ln(4K/beta))`
    #[default]
    Theorem,
    Constant,
    None,
}

/// Overrides for the resolved schedule. Unset values fall back to theorem
/// formulas (theorem mode) or to the tuned defaults (explicit mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// Theorem mode for bandits and restarts, explicit otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ScheduleMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<ClipMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Lipschitz constant; `sigma_max(A)` (plus `mu R` for composites) if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
    /// Distance bound; `||x0 - x*||` if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup: Option<ProxSetup>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<FeasibleSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_stage_iterations: Option<usize>,
    /// Restart the mirror-descent solver instead of SSTM.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_smd: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    /// Expected losses of the arms.
    pub mu: Vec<f64>,
    pub horizon: u64,
    pub shared_noise: bool,
}

impl Default for BanditSection {
    fn default() -> Self {
        Self {
            mu: vec![3.0, 3.5],
            horizon: 30_000,
            shared_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub problem: ProblemSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    pub schedule: ScheduleSection,
    pub bandit: BanditSection,
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut c = Self::default();
        c.experiment.kind = kind;
        c
    }

    pub fn runs(&self) -> usize {
        self.experiment
            .runs
            .unwrap_or(if self.experiment.kind.is_bandit() { 100 } else { 15 })
    }

    pub fn trace_every(&self) -> usize {
        self.experiment
            .trace_every
            .unwrap_or(if self.experiment.kind.is_bandit() { 10 } else { 100 })
    }

    pub fn schedule_mode(&self) -> ScheduleMode {
        self.schedule.mode.unwrap_or(match self.experiment.kind {
            ExperimentKind::Bandit | ExperimentKind::FullFeedback | ExperimentKind::ZoRestarted => {
                ScheduleMode::Theorem
            }
            _ => ScheduleMode::Explicit,
        })
    }

    pub fn problem_kind(&self) -> ProblemKind {
        self.problem.kind.unwrap_or(if self.experiment.kind == ExperimentKind::ZoRestarted {
            ProblemKind::Composite
        } else {
            ProblemKind::LeastSquares
        })
    }

    pub fn noise(&self) -> NoiseSection {
        self.noise
            .clone()
            .unwrap_or_else(|| NoiseSection::default_for(self.experiment.kind))
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|source| HarnessError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.runs() == 0 {
            return bad("experiment.runs must be at least 1");
        }
        if self.trace_every() == 0 {
            return bad("experiment.trace_every must be at least 1");
        }
        if self.experiment.kind.is_bandit() {
            if self.bandit.mu.is_empty() {
                return bad("bandit.mu needs at least one arm");
            }
            if self.bandit.horizon == 0 {
                return bad("bandit.horizon must be positive");
            }
        } else {
            if self.problem.d == 0 || self.problem.l == 0 {
                return bad("problem.d and problem.l must be positive");
            }
            if let Some(x0) = &self.problem.x0 {
                if x0.len() != self.problem.d {
                    return Err(HarnessError::Config(format!(
                        "problem.x0 has {} entries, expected d = {}",
                        x0.len(),
                        self.problem.d
                    )));
                }
            }
        }
        self.noise().dist.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use medclip::noise::MixtureSpec;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.problem.d, c.problem.l), (16, 200));
        assert_eq!(c.runs(), 15);
        assert_eq!(c.schedule_mode(), ScheduleMode::Explicit);
        let b = ExperimentConfig::from_toml("[experiment]\nkind = \"bandit\"\n").unwrap();
        assert_eq!((b.runs(), b.schedule_mode()), (100, ScheduleMode::Theorem));
        assert_eq!(c.bandit.mu, vec![3.0, 3.5]);
    }

    #[test]
    fn round_trips_every_section() {
        let mut c = ExperimentConfig::for_kind(ExperimentKind::ZoSgd);
        c.noise = Some(NoiseSection {
            mode: OracleMode::Lipschitz,
            dist: NoiseDist::Mixture(MixtureSpec {
                weight: 0.9,
                symmetric: SymmetricDist::Stable {
                    alpha: 1.5,
                    scale: 1.0,
                },
                asymmetric: SymmetricDist::Normal { std: 2.0 },
            }),
        });
        c.schedule.a = Some(0.01);
        c.schedule.setup = Some(ProxSetup::Entropy { gamma: 0.1 });
        c.schedule.set = Some(FeasibleSet::Simplex);
        c.problem.x0 = Some(vec![0.5; 16]);
        let text = c.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{text}");
    }

    #[test]
    fn noise_is_written_as_flat_keys() {
        let c = ExperimentConfig::from_toml(
            "[noise]\nmode = \"independent\"\ntype = \"symmetric\"\nkind = \"cauchy\"\nscale = 2.0\n",
        )
        .unwrap();
        assert_eq!(
            c.noise().dist,
            NoiseDist::Symmetric(SymmetricDist::Cauchy { scale: 2.0 })
        );
    }

    #[test]
    fn entropy_gamma_defaults_to_one() {
        let c = ExperimentConfig::from_toml(
            "[experiment]\nkind = \"zo_smd\"\n[schedule.setup]\nkind = \"entropy\"\n",
        )
        .unwrap();
        assert_eq!(c.schedule.setup, Some(ProxSetup::Entropy { gamma: 1.0 }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[experiment]\nrunz = 3\n").is_err());
    }

    #[test]
    fn validation_catches_shape_errors() {
        let mut c = ExperimentConfig::default();
        c.problem.x0 = Some(vec![0.0; 3]);
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
