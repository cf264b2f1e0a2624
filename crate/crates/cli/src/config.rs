use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use sea_core::Hyperparams;
use sea_providers::ProviderConfig;

/// Contents of the `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hyperparams: Hyperparams,
    /// Chat endpoint used by `extract` and `annotate`.
    pub provider: Option<ProviderConfig>,
    /// Zero-shot classifier endpoint used for P.
    pub classifier: Option<ProviderConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        for p in config.provider.iter().chain(&config.classifier) {
            p.validate()?;
        }
        Ok(config)
    }
}

/// Per-flag hyperparameter overrides; these win over the config file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct HyperparamFlags {
    #[arg(long, global = true, value_name = "X")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub lambda: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub eta: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub k: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub tau: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub r: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub gamma: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub delta: Option<f64>,
    #[arg(long = "epsilon-clip", global = true, value_name = "X")]
    pub epsilon_clip: Option<f64>,
}

impl HyperparamFlags {
    pub fn apply(&self, base: Hyperparams) -> Result<Hyperparams> {
        let mut hp = base;
        let pairs = [
            (&mut hp.alpha, self.alpha),
            (&mut hp.beta, self.beta),
            (&mut hp.lambda, self.lambda),
            (&mut hp.eta, self.eta),
            (&mut hp.k, self.k),
            (&mut hp.tau, self.tau),
            (&mut hp.r, self.r),
            (&mut hp.gamma, self.gamma),
            (&mut hp.delta, self.delta),
            (&mut hp.epsilon_clip, self.epsilon_clip),
        ];
        for (slot, value) in pairs {
            if let Some(v) = value {
                *slot = v;
            }
        }
        hp.validate()?;
        Ok(hp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let config: RunConfig = serde_json::from_str(r#"{"hyperparams": {"alpha": 3.0, "beta": 5.0}}"#).unwrap();
        let flags = HyperparamFlags {
            beta: Some(7.0),
            ..Default::default()
        };
        let hp = flags.apply(config.hyperparams).unwrap();
        assert_eq!(hp.alpha, 3.0);
        assert_eq!(hp.beta, 7.0);
        assert_eq!(hp.gamma, Hyperparams::default().gamma);
        let bad = HyperparamFlags {
            alpha: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.apply(Hyperparams::default()).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"hyperparameters": {}}"#).is_err());
    }
}
