//! TOML configuration files. Every key is optional; command-line flags
//! override whatever the file sets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub algo: Option<Vec<String>>,
    pub grid: Option<Vec<f64>>,
    pub preset: Option<String>,
    pub horizon: Option<u64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub serial: Option<bool>,
    pub allow_experimental: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub kind: Option<String>,
    pub d: Option<usize>,
    pub n_arms: Option<usize>,
    pub means: Option<Vec<f64>>,
    pub cross_corr: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub beta_star: Option<Vec<f64>>,
    pub delta_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyRanSection {
    /// `practical` or `theory`.
    pub imputation: Option<String>,
    /// `lagged` or `concurrent`.
    pub timing: Option<String>,
    /// `practical` or `theory`.
    pub schedule: Option<String>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub hyran: HyRanSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BanditError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BanditError::io(path, e))?;
        Self::parse(&text).map_err(|e| BanditError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BanditError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_are_optional() {
        let cfg = ConfigFile::parse("[experiment]\nhorizon = 500\n").unwrap();
        assert_eq!(cfg.experiment.horizon, Some(500));
        assert_eq!(cfg.environment, EnvironmentSection::default());
        assert_eq!(ConfigFile::parse("").unwrap(), ConfigFile::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ConfigFile::parse("[experiment]\nhorizn = 5\n"),
            Err(BanditError::Config(_))
        ));
    }

    #[test]
    fn round_trip() {
        let mut cfg = ConfigFile::default();
        cfg.environment.d = Some(5);
        cfg.environment.means = Some(vec![-2.0, 2.0]);
        cfg.hyran.imputation = Some("theory".into());
        let back = ConfigFile::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
