use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use uqsched_core::{AnalysisConfig, PredictorConfig};

use crate::Failure;

/// Contents of the TOML configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub analysis: AnalysisConfig,
    pub predictor: PredictorConfig,
    pub paths: Paths,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

/// Flags that take precedence over the configuration file.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    #[arg(long, global = true, value_name = "N")]
    pub sample_threshold: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub subset_target_size: Option<usize>,
    #[arg(long, global = true, value_name = "T")]
    pub trust: Option<f64>,
    /// Contamination weight used as given, ignoring --trust.
    #[arg(long, global = true, value_name = "EPS")]
    pub epsilon_raw: Option<f64>,
    #[arg(long, global = true, value_name = "BOOL")]
    pub normalize_area: Option<bool>,
    #[arg(long, global = true, value_name = "SECONDS")]
    pub noise_std: Option<f64>,
    #[arg(long, global = true, value_name = "SECONDS")]
    pub length_scale: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_name = "BOOL")]
    pub optimize: Option<bool>,
    #[arg(long, global = true, value_name = "N")]
    pub min_train_size: Option<usize>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        let a = &mut self.analysis;
        set(&mut a.sample_threshold, o.sample_threshold);
        set(&mut a.subset_target_size, o.subset_target_size);
        set(&mut a.trust, o.trust);
        set(&mut a.normalize_area, o.normalize_area);
        if o.epsilon_raw.is_some() {
            a.epsilon_raw = o.epsilon_raw;
        }
        let p = &mut self.predictor;
        set(&mut p.noise_std, o.noise_std);
        set(&mut p.length_scale, o.length_scale);
        set(&mut p.alpha, o.alpha);
        set(&mut p.optimize, o.optimize);
        set(&mut p.min_train_size, o.min_train_size);
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.analysis
            .validate()
            .and_then(|_| self.predictor.validate())
            .map_err(|e| Failure::usage(format!("invalid configuration: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
