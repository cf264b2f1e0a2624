//! Acquisition of the three score signals: commonsense elements (E),
//! per-element visual presence (V) and ground-truth class probability (P).
//!
//! Remote calls go through [`transport::ChatTransport`] and
//! [`transport::ClassifierTransport`]; [`cache::Cached`] and
//! [`transport::Retrying`] wrap either. [`fixture::FixtureProvider`] serves
//! signals offline from annotation files.

pub mod cache;
pub mod config;
pub mod error;
pub mod fixture;
pub mod ops;
pub mod parse;
pub mod prompts;
pub mod transport;

pub use config::{ExtractionPrompt, PromptStyle, ProviderConfig, YesNoTemplate};
pub use error::{ProviderError, Result};
pub use ops::{annotate_elements, classify, extract_commonsense, ClassifierResult, VqaResult};
pub use parse::ParseStatus;

use std::sync::Arc;

use cache::{Cached, ResponseCache};
use transport::{ChatTransport, ClassifierTransport, HttpChat, HttpClassifier, Retrying};

/// HTTP chat client with retries, behind the cache when one is given.
pub fn chat_transport(config: &ProviderConfig, cache: Option<Arc<ResponseCache>>) -> Result<Box<dyn ChatTransport>> {
    let http = Retrying::new(HttpChat::new(config)?, config);
    Ok(match cache {
        Some(cache) => Box::new(Cached::new(http, cache)),
        None => Box::new(http),
    })
}

/// HTTP classifier client with retries, behind the cache when one is given.
pub fn classifier_transport(
    config: &ProviderConfig,
    cache: Option<Arc<ResponseCache>>,
) -> Result<Box<dyn ClassifierTransport>> {
    let http = Retrying::new(HttpClassifier::new(config)?, config);
    Ok(match cache {
        Some(cache) => Box::new(Cached::new(http, cache)),
        None => Box::new(http),
    })
}
