use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::pipeline::TrainConfig;
use crate::topology::SwarmConfig;

/// Split fractions written into synthetic datasets and used when a dataset
/// carries no split tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.0,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub trees: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { trees: 20 }
    }
}

/// Everything a command can be configured with. Loaded from TOML, then
/// overridden by flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Copied into every section's seed unless `--seed` overrides it.
    pub seed: Option<u64>,
    /// Traversal root; the medoid of the mean layout when absent.
    pub root: Option<usize>,
    pub split: SplitConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub swarm: SwarmConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.train.seed = seed;
        self.swarm.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let mut c = RunConfig::default();
        c.set_seed(3);
        c.train.patience = Some(4);
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3").is_err());
        let c: RunConfig = toml::from_str("[train]\nepochs = 3\n[train.adam]\nlr = 0.01").unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.adam.lr, 0.01);
        assert_eq!(c.train.adam.beta2, 0.99);
    }
}
