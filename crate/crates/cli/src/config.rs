use std::path::{Path, PathBuf};

use effham::{BathSpec, Operator, SpinModel, SuperOperator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Split,
    Expand,
    Oracle,
    Sweep,
}

/// Top-level run configuration, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SpinModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default = "default_orders")]
    pub orders: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
}

fn default_orders() -> usize {
    2
}

fn default_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_cutoff() -> usize {
    8
}

/// Uniform grid `0, h, ..., T`; only every `every`-th point is reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "default_every")]
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub rate: f64,
    pub op: Operator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Explicit `d^2 x d^2` matrix in the column-stacking convention.
    Superoperator { matrix: SuperOperator },
    Lindblad {
        hamiltonian: Operator,
        #[serde(default)]
        jumps: Vec<JumpSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_cutoff")]
    pub fock_cutoff: usize,
    /// Also run at half the coupling and report scaling exponents.
    #[serde(default = "default_true")]
    pub scaling: bool,
    #[serde(default = "default_true")]
    pub check_truncation: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            fock_cutoff: default_cutoff(),
            scaling: true,
            check_truncation: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Beta,
    OmegaC,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Beta => "beta",
            SweepParameter::OmegaC => "omega_c",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn model(&self) -> Result<&SpinModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{:?} needs a \"model\"", self.command)))
    }

    pub fn bath(&self) -> Result<&BathSpec, CliError> {
        self.bath
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{:?} needs a \"bath\"", self.command)))
    }

    pub fn times(&self) -> Result<&TimeGrid, CliError> {
        let grid = self
            .times
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{:?} needs \"times\"", self.command)))?;
        if grid.every == 0 {
            return Err(CliError::Config("times.every must be at least 1".into()));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPAND: &str = r#"{
        "command": "expand",
        "model": {"omega": 1.0, "coupling": "sigma_x", "lambda": 0.1},
        "bath": {
            "spectral_density": {"kind": "ohmic_exp", "alpha": 0.05, "omega_c": 5.0},
            "beta": "inf"
        },
        "times": {"horizon": 2.0, "step": 0.1},
        "orders": 2,
        "output": "out"
    }"#;

    #[test]
    fn round_trip() {
        let config = RunConfig::from_json(EXPAND).unwrap();
        assert_eq!(config.command, Command::Expand);
        assert_eq!(config.times.as_ref().unwrap().every, 1);
        let again = RunConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn generator_specs_parse() {
        let text = r#"{
            "command": "split",
            "generator": {
                "kind": "lindblad",
                "hamiltonian": {"dim": 2, "re": [0.5, 0, 0, -0.5], "im": [0, 0, 0, 0]},
                "jumps": [{"rate": 1.0, "op": {"dim": 2, "re": [0.3, 0, 1, 0.3], "im": [0, 0, 0, 0]}}]
            },
            "mc": {"samples": 2000, "seed": 4}
        }"#;
        let config = RunConfig::from_json(text).unwrap();
        assert!(matches!(config.generator, Some(GeneratorSpec::Lindblad { .. })));
        assert_eq!(RunConfig::from_json(&config.to_json()).unwrap(), config);
    }

    #[test]
    fn rejects_unknown_fields_and_missing_sections() {
        assert!(RunConfig::from_json(r#"{"command": "expand", "colour": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command": "fly"}"#).is_err());
        let config = RunConfig::from_json(r#"{"command": "expand"}"#).unwrap();
        assert!(matches!(config.model(), Err(CliError::Config(_))));
        assert!(matches!(config.times(), Err(CliError::Config(_))));
    }
}
