use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Tod,
    Greedy,
    GreedyExpected,
    RoundRobin,
    Iir,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Tod => "tod",
            PolicyKind::Greedy => "greedy",
            PolicyKind::GreedyExpected => "greedy_expected",
            PolicyKind::RoundRobin => "round_robin",
            PolicyKind::Iir => "iir",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "tod" => Ok(PolicyKind::Tod),
            "greedy" => Ok(PolicyKind::Greedy),
            "greedy_expected" => Ok(PolicyKind::GreedyExpected),
            "round_robin" | "rr" => Ok(PolicyKind::RoundRobin),
            "iir" => Ok(PolicyKind::Iir),
            other => Err(Error::InvalidConfig(format!("unknown policy {other:?}"))),
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, PolicyKind::Tod | PolicyKind::Iir)
    }
}

/// How the discount factor is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaMode {
    Fixed { value: f64 },
    /// Derived from the breakpoint count, horizon and latency cap.
    Auto,
    /// The grid value with the lowest mean latency over the seeds.
    Sweep { grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub xi: f64,
    pub gamma: GammaMode,
    /// Exploration share of the IIR scheme. Searched over a fixed grid when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Keep every n-th slot in per-slot series; 1 keeps all.
    pub downsample: u64,
    /// Worker threads for independent runs; 0 picks the machine default.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub env: EnvConfig,
    pub policy: PolicySpec,
    pub run: RunSettings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

impl ExperimentSpec {
    /// The simulation setup of the reference experiments with the learner
    /// using the derived discount factor.
    pub fn paper_defaults() -> Self {
        Self {
            env: EnvConfig::paper_defaults(),
            policy: PolicySpec {
                kind: PolicyKind::Tod,
                xi: 0.6,
                gamma: GammaMode::Auto,
                explore_fraction: None,
            },
            run: RunSettings {
                seeds: vec![1],
                output_dir: PathBuf::from("out"),
                downsample: 10,
                threads: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.run.downsample == 0 {
            return Err(Error::InvalidConfig("downsample must be at least 1".into()));
        }
        if !(self.policy.xi > 0.5) {
            return Err(Error::InvalidConfig(format!(
                "xi must exceed 1/2, got {}",
                self.policy.xi
            )));
        }
        let in_unit = |g: f64| g > 0.0 && g < 1.0;
        match &self.policy.gamma {
            GammaMode::Fixed { value } if !in_unit(*value) => {
                return Err(Error::InvalidConfig(format!(
                    "gamma must lie in (0, 1), got {value}"
                )))
            }
            GammaMode::Sweep { grid } if grid.is_empty() => {
                return Err(Error::InvalidConfig("gamma grid is empty".into()))
            }
            GammaMode::Sweep { grid } if !grid.iter().all(|&g| in_unit(g)) => {
                return Err(Error::InvalidConfig(
                    "gamma grid values must lie in (0, 1)".into(),
                ))
            }
            _ => {}
        }
        if let Some(rho) = self.policy.explore_fraction {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "explore_fraction must lie in (0, 1), got {rho}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Seeds above `i64::MAX` have no TOML representation and are rejected.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults_round_trip() {
        let spec = ExperimentSpec::paper_defaults();
        let text = spec.to_toml_string().unwrap();
        assert!(text.contains("[env.queue]"));
        let back = ExperimentSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn sweep_mode_parses() {
        let mut spec = ExperimentSpec::paper_defaults();
        spec.policy.gamma = GammaMode::Sweep {
            grid: vec![0.98, 0.9985],
        };
        spec.policy.explore_fraction = Some(0.1);
        let text = spec.to_toml_string().unwrap();
        assert!(text.contains("mode = \"sweep\""));
        assert_eq!(ExperimentSpec::from_toml_str(&text).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = ExperimentSpec::paper_defaults();
        spec.run.seeds.clear();
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::paper_defaults();
        spec.policy.gamma = GammaMode::Sweep {
            grid: vec![0.9, 1.0],
        };
        assert!(spec.validate().is_err());

        let text = ExperimentSpec::paper_defaults()
            .to_toml_string()
            .unwrap()
            .replace("tau_max = 20", "tau_max = 20\nbogus = 1");
        assert!(matches!(
            ExperimentSpec::from_toml_str(&text),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn policy_names() {
        for kind in [
            PolicyKind::Tod,
            PolicyKind::Greedy,
            PolicyKind::GreedyExpected,
            PolicyKind::RoundRobin,
            PolicyKind::Iir,
        ] {
            assert_eq!(PolicyKind::parse(kind.name()).unwrap(), kind);
        }
        assert_eq!(PolicyKind::parse("round-robin").unwrap(), PolicyKind::RoundRobin);
        assert!(PolicyKind::parse("thompson").is_err());
    }
}
