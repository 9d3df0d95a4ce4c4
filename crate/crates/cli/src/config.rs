use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Contents of a `--config` TOML file. Command-line flags take precedence
/// over every field.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub stages: Option<usize>,
    pub out: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub epsilon: Option<f64>,
    pub format: Option<String>,
    pub full_precision: Option<bool>,
    pub shots: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg: RunConfig = toml::from_str(
            "seed = 3\n[train]\nepochs = 2\n[verify]\nepsilon = 0.01\nformat = \"json\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.train.epochs, Some(2));
        assert_eq!(cfg.verify.epsilon, Some(0.01));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("sed = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
    }
}
