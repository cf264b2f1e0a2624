//! Request transports: the generic JSON chat-completion shape, a
//! zero-shot classifier endpoint, retries, and an in-process scripted mock.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use crate::config::ProviderConfig;
use crate::error::{ProviderError, Result};

/// Opaque image payload, passed through as base64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub bytes: Vec<u8>,
    pub mime: String,
}

impl Image {
    pub fn new(bytes: Vec<u8>, mime: impl Into<String>) -> Self {
        Self { bytes, mime: mime.into() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let mime = match ext.as_str() {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "webp" => "image/webp",
            "svg" => "image/svg+xml",
            _ => "application/octet-stream",
        };
        Ok(Self::new(std::fs::read(path)?, mime))
    }

    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.mime, BASE64.encode(&self.bytes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: Option<String>,
    pub prompt: String,
    pub image: Option<Image>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyRequest {
    pub model: String,
    pub image: Image,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Timeouts, connection failures, 429 and 5xx responses.
    Retryable(String),
    Fatal(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Retryable(m) => write!(f, "retryable: {m}"),
            TransportError::Fatal(m) => write!(f, "{m}"),
        }
    }
}

pub type TransportResult<T> = std::result::Result<T, TransportError>;

pub trait ChatTransport: Send + Sync {
    /// Returns the assistant message text.
    fn complete(&self, request: &ChatRequest) -> TransportResult<String>;
}

pub trait ClassifierTransport: Send + Sync {
    /// Returns one unnormalized score per text, in order.
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>>;
}

/// Runs `op` until it succeeds, fails fatally, or `max_retries + 1`
/// attempts have been made. Backoff doubles from `backoff` after each
/// retryable failure.
pub fn with_retries<T>(
    max_retries: u32,
    backoff: Duration,
    mut op: impl FnMut() -> TransportResult<T>,
) -> Result<T> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match op() {
            Ok(v) => return Ok(v),
            Err(TransportError::Retryable(m)) if attempt <= max_retries => {
                log::warn!("attempt {attempt} failed ({m}); retrying");
                let delay = backoff.saturating_mul(1 << (attempt - 1).min(16));
                if !delay.is_zero() {
                    thread::sleep(delay);
                }
            }
            Err(e) => {
                return Err(ProviderError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                })
            }
        }
    }
}

fn classify_status(status: reqwest::StatusCode, body: String) -> TransportError {
    let message = format!("HTTP {status}: {}", body.chars().take(500).collect::<String>());
    if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        TransportError::Retryable(message)
    } else {
        TransportError::Fatal(message)
    }
}

fn send_json(client: &reqwest::blocking::Client, url: &str, key: Option<&str>, body: &Value) -> TransportResult<Value> {
    let mut req = client.post(url).json(body);
    if let Some(key) = key {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| {
        if e.is_timeout() || e.is_connect() || e.is_request() {
            TransportError::Retryable(e.to_string())
        } else {
            TransportError::Fatal(e.to_string())
        }
    })?;
    let status = resp.status();
    let text = resp.text().map_err(|e| TransportError::Retryable(e.to_string()))?;
    if !status.is_success() {
        return Err(classify_status(status, text));
    }
    serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("response is not JSON: {e}")))
}

fn build_client(config: &ProviderConfig) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(config.timeout())
        .build()
        .map_err(|e| ProviderError::Config(format!("cannot build HTTP client: {e}")))
}

/// Chat-completion client for any gateway accepting
/// `{"model", "messages": [...]}` and answering with
/// `{"choices": [{"message": {"content": ...}}]}`.
pub struct HttpChat {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpChat {
    pub fn new(config: &ProviderConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            client: build_client(config)?,
            url: config.endpoint_url.clone(),
            api_key: config.api_key(),
        })
    }

    pub fn request_body(request: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        let content = match &request.image {
            None => json!(request.prompt),
            Some(image) => json!([
                {"type": "image_url", "image_url": {"url": image.data_url()}},
                {"type": "text", "text": request.prompt},
            ]),
        };
        messages.push(json!({"role": "user", "content": content}));
        json!({"model": request.model, "messages": messages, "temperature": 0})
    }
}

impl ChatTransport for HttpChat {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        let body = Self::request_body(request);
        let resp = send_json(&self.client, &self.url, self.api_key.as_deref(), &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))
    }
}

/// Zero-shot classifier client: posts `{"model", "image": data-url,
/// "texts": [...]}` and reads `{"scores": [...]}` (or `"logits"`).
pub struct HttpClassifier {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpClassifier {
    pub fn new(config: &ProviderConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            client: build_client(config)?,
            url: config.endpoint_url.clone(),
            api_key: config.api_key(),
        })
    }
}

impl ClassifierTransport for HttpClassifier {
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>> {
        let body = json!({
            "model": request.model,
            "image": request.image.data_url(),
            "texts": request.texts,
        });
        let resp = send_json(&self.client, &self.url, self.api_key.as_deref(), &body)?;
        let scores = resp
            .get("scores")
            .or_else(|| resp.get("logits"))
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError::Fatal("response has no `scores` array".into()))?;
        scores
            .iter()
            .map(|s| s.as_f64().ok_or_else(|| TransportError::Fatal(format!("non-numeric score {s}"))))
            .collect()
    }
}

/// Wraps a transport so every call gets the retry budget of `config`.
pub struct Retrying<T> {
    inner: T,
    max_retries: u32,
    backoff: Duration,
}

impl<T> Retrying<T> {
    pub fn new(inner: T, config: &ProviderConfig) -> Self {
        Self {
            inner,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.retry_backoff_ms),
        }
    }
}

fn flatten(e: ProviderError) -> TransportError {
    TransportError::Fatal(e.to_string())
}

impl<T: ChatTransport> ChatTransport for Retrying<T> {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        with_retries(self.max_retries, self.backoff, || self.inner.complete(request)).map_err(flatten)
    }
}

impl<T: ClassifierTransport> ClassifierTransport for Retrying<T> {
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>> {
        with_retries(self.max_retries, self.backoff, || self.inner.scores(request)).map_err(flatten)
    }
}

type Responder = dyn Fn(&ChatRequest) -> TransportResult<String> + Send + Sync;

/// In-process chat transport driven by a closure, counting calls.
pub struct ScriptedChat {
    respond: Box<Responder>,
    calls: AtomicUsize,
    log: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new(respond: impl Fn(&ChatRequest) -> TransportResult<String> + Send + Sync + 'static) -> Self {
        Self {
            respond: Box::new(respond),
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Always answers with `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_| Ok(text.clone()))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatTransport for ScriptedChat {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(request.clone());
        (self.respond)(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        (**self).complete(request)
    }
}

impl<T: ClassifierTransport + ?Sized> ClassifierTransport for std::sync::Arc<T> {
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>> {
        (**self).scores(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        (**self).complete(request)
    }
}

impl<T: ClassifierTransport + ?Sized> ClassifierTransport for Box<T> {
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>> {
        (**self).scores(request)
    }
}
