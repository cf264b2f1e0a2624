use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{ProviderError, Result};

/// How element-presence questions are put to a vision-language model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Whole element list in one request, boolean JSON back.
    #[default]
    StructuredJson,
    /// One yes/no question per element.
    PerElementYesNo,
    /// Whole element list in one request, 0/1 JSON keyed by file name.
    MolmoJson,
}

/// Wording of the per-element question for [`PromptStyle::PerElementYesNo`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YesNoTemplate {
    #[default]
    Standard,
    SmolVlm,
    Llava,
    Blip,
}

/// Which commonsense extraction prompt to send.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionPrompt {
    #[default]
    StructuredAnalyzer,
    DetailedInventory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    /// Request timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub max_parallel: usize,
    pub prompt_style: PromptStyle,
    pub yes_no_template: YesNoTemplate,
    pub extraction_prompt: ExtractionPrompt,
    /// Base delay before the first retry, doubled on each further retry.
    pub retry_backoff_ms: u64,
    /// Text prompt for each candidate label in zero-shot classification.
    pub label_template: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://localhost:8000/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env: None,
            timeout: 60.0,
            max_retries: 3,
            max_parallel: 4,
            prompt_style: PromptStyle::StructuredJson,
            yes_no_template: YesNoTemplate::Standard,
            extraction_prompt: ExtractionPrompt::StructuredAnalyzer,
            retry_backoff_ms: 500,
            label_template: "a black line drawing of a {class}".into(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_parallel < 1 {
            return Err(ProviderError::Config("max_parallel must be at least 1".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(ProviderError::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(ProviderError::Config("endpoint_url is empty".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(ProviderError::Config("model_name is empty".into()));
        }
        if !self.label_template.contains("{class}") {
            return Err(ProviderError::Config("label_template must contain `{class}`".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }

    /// Reads the API key from the configured environment variable. The key
    /// itself is never logged.
    pub fn api_key(&self) -> Option<String> {
        self.api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|k| !k.is_empty())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text).map_err(|e| ProviderError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn label_prompt(&self, class: &str) -> String {
        self.label_template.replace("{class}", &class.replace('_', " "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: ProviderConfig =
            serde_json::from_str(r#"{"model_name": "qwen2.5-vl-7b", "prompt_style": "per_element_yes_no"}"#).unwrap();
        assert_eq!(c.model_name, "qwen2.5-vl-7b");
        assert_eq!(c.prompt_style, PromptStyle::PerElementYesNo);
        assert_eq!(c.max_parallel, 4);
        c.validate().unwrap();
        assert!(serde_json::from_str::<ProviderConfig>(r#"{"modle": "x"}"#).is_err());
    }

    #[test]
    fn validation() {
        let bad = ProviderConfig { max_parallel: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ProviderConfig { timeout: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(ProviderConfig::default().label_prompt("ice_cream_cone"), "a black line drawing of a ice cream cone");
    }
}
