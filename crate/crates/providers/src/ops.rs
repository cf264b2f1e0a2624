//! The three signal-acquisition operations: commonsense extraction (E),
//! element presence annotation (V) and zero-shot classification (P).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sea_core::dataset::{ClassEntry, CommonsenseDB, Element};
use sea_core::evaluation::PresenceSet;

use crate::config::{ExtractionPrompt, PromptStyle, ProviderConfig};
use crate::error::{ProviderError, Result};
use crate::parse::{json_bool, parse_json_lenient, yes_no, is_snake_case, ParseStatus};
use crate::prompts;
use crate::transport::{ChatRequest, ChatTransport, ClassifierTransport, ClassifyRequest, Image, TransportError};

fn request_error(e: TransportError) -> ProviderError {
    ProviderError::Request(e.to_string())
}

fn ask(chat: &dyn ChatTransport, config: &ProviderConfig, prompt: String, image: Option<&Image>) -> Result<String> {
    chat.complete(&ChatRequest {
        model: config.model_name.clone(),
        system: None,
        prompt,
        image: image.cloned(),
    })
    .map_err(request_error)
}

/// Asks the model for the commonsense element list of `class_name` and
/// validates it: the class must match, `total_elements` must equal the list
/// length, ids must read `<class>.<name>`, and under the structured-analyzer
/// prompt every name must be snake_case.
pub fn extract_commonsense(class_name: &str, config: &ProviderConfig, chat: &dyn ChatTransport) -> Result<ClassEntry> {
    let prompt = prompts::render_extraction(config.extraction_prompt, class_name);
    let raw = ask(chat, config, prompt, None)?;
    let fail = |message: String| ProviderError::Extraction {
        message,
        raw: raw.clone(),
    };

    let (value, _) = parse_json_lenient(&raw).ok_or_else(|| fail("response is not valid JSON".into()))?;
    let entry: ClassEntry = serde_json::from_value(value).map_err(|e| fail(format!("schema mismatch: {e}")))?;
    if entry.class.trim() != class_name {
        return Err(fail(format!("response describes class `{}`, expected `{class_name}`", entry.class)));
    }
    match entry.total_elements {
        None => return Err(fail("missing total_elements".into())),
        Some(n) if n != entry.elements.len() => {
            return Err(fail(format!(
                "total_elements is {n} but {} elements were returned",
                entry.elements.len()
            )))
        }
        Some(_) => {}
    }
    if config.extraction_prompt == ExtractionPrompt::StructuredAnalyzer {
        if let Some(bad) = entry.elements.iter().find(|e| !is_snake_case(e.name.trim())) {
            return Err(fail(format!("element name `{}` is not snake_case", bad.name)));
        }
    }
    let db = CommonsenseDB::from_entries(vec![entry]).map_err(|e| fail(e.to_string()))?;
    Ok(db.to_entries().remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaResult {
    pub sketch_id: String,
    pub presence: BTreeMap<String, bool>,
    pub raw_response: String,
    pub parse_status: ParseStatus,
}

impl VqaResult {
    pub fn visible_count(&self) -> u32 {
        self.presence.values().filter(|&&b| b).count() as u32
    }
}

impl PresenceSet for VqaResult {
    fn sketch_id(&self) -> &str {
        &self.sketch_id
    }

    fn presence(&self) -> &BTreeMap<String, bool> {
        &self.presence
    }
}

/// Maps a JSON object of judgments onto the queried elements. Keys may be
/// element ids or bare names. Unknown keys are dropped, missing or
/// unreadable values become `false`; each of these marks the result
/// repaired. `numeric_exact` treats 0/1 as exact answers rather than
/// coercions.
fn presence_from_object(
    object: &Map<String, Value>,
    elements: &[Element],
    numeric_exact: bool,
) -> (BTreeMap<String, bool>, ParseStatus) {
    let mut status = ParseStatus::Ok;
    let mut presence = BTreeMap::new();
    for (key, value) in object {
        let Some(el) = elements.iter().find(|e| &e.id == key || &e.name == key) else {
            log::debug!("dropping unknown key `{key}`");
            status = ParseStatus::Repaired;
            continue;
        };
        let answer = match json_bool(value) {
            Some((b, exact)) => {
                if !(exact || numeric_exact && value.is_number()) {
                    status = ParseStatus::Repaired;
                }
                b
            }
            None => {
                status = ParseStatus::Repaired;
                false
            }
        };
        presence.insert(el.id.clone(), answer);
    }
    for el in elements {
        if !presence.contains_key(&el.id) {
            status = ParseStatus::Repaired;
            presence.insert(el.id.clone(), false);
        }
    }
    (presence, status)
}

fn all_false(elements: &[Element]) -> BTreeMap<String, bool> {
    elements.iter().map(|e| (e.id.clone(), false)).collect()
}

/// Parses a structured-JSON or Molmo reply. A Molmo reply nests the
/// judgments under a single file-name key, which is unwrapped.
pub fn parse_presence(raw: &str, elements: &[Element], style: PromptStyle) -> (BTreeMap<String, bool>, ParseStatus) {
    let Some((value, repair)) = parse_json_lenient(raw) else {
        return (all_false(elements), ParseStatus::Failed);
    };
    let Value::Object(mut object) = value else {
        return (all_false(elements), ParseStatus::Failed);
    };
    if style == PromptStyle::MolmoJson && object.len() == 1 {
        let (key, _) = object.iter().next().expect("one entry");
        let is_element = elements.iter().any(|e| &e.id == key || &e.name == key);
        if !is_element {
            if let Some(Value::Object(inner)) = object.values().next().cloned() {
                object = inner;
            }
        }
    }
    let (presence, status) = presence_from_object(&object, elements, style == PromptStyle::MolmoJson);
    (presence, repair.and(status))
}

/// Queries presence of each element of `class_name` in `image` using the
/// configured prompt style.
pub fn annotate_elements(
    sketch_id: &str,
    image: &Image,
    class_name: &str,
    elements: &[Element],
    config: &ProviderConfig,
    chat: &dyn ChatTransport,
) -> Result<VqaResult> {
    if elements.is_empty() {
        return Err(ProviderError::InvalidInput(format!("no elements to query for class `{class_name}`")));
    }
    let (presence, raw_response, parse_status) = match config.prompt_style {
        PromptStyle::StructuredJson => {
            let raw = ask(chat, config, prompts::render_structured_annotation(class_name, elements), Some(image))?;
            let (p, s) = parse_presence(&raw, elements, PromptStyle::StructuredJson);
            (p, raw, s)
        }
        PromptStyle::MolmoJson => {
            let raw = ask(chat, config, prompts::render_molmo(class_name, sketch_id, elements), Some(image))?;
            let (p, s) = parse_presence(&raw, elements, PromptStyle::MolmoJson);
            (p, raw, s)
        }
        PromptStyle::PerElementYesNo => {
            let mut presence = BTreeMap::new();
            let mut answers = Vec::with_capacity(elements.len());
            let mut unreadable = 0;
            for el in elements {
                let prompt = prompts::render_yes_no(config.yes_no_template, class_name, el);
                let answer = ask(chat, config, prompt, Some(image))?;
                let value = yes_no(&answer).unwrap_or_else(|| {
                    unreadable += 1;
                    false
                });
                presence.insert(el.id.clone(), value);
                answers.push(answer);
            }
            let status = match unreadable {
                0 => ParseStatus::Ok,
                n if n == elements.len() => ParseStatus::Failed,
                _ => ParseStatus::Repaired,
            };
            (presence, serde_json::to_string(&answers)?, status)
        }
    };
    Ok(VqaResult {
        sketch_id: sketch_id.to_string(),
        presence,
        raw_response,
        parse_status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub sketch_id: String,
    pub probabilities: BTreeMap<String, f64>,
    pub ground_truth_prob: f64,
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Zero-shot classification over `candidates`, softmax-normalized over the
/// candidate set.
pub fn classify(
    sketch_id: &str,
    image: &Image,
    candidates: &[String],
    ground_truth: &str,
    config: &ProviderConfig,
    classifier: &dyn ClassifierTransport,
) -> Result<ClassifierResult> {
    let unique: BTreeSet<&String> = candidates.iter().collect();
    if unique.len() != candidates.len() {
        return Err(ProviderError::Classification("duplicate candidate labels".into()));
    }
    if !unique.contains(&ground_truth.to_string()) {
        return Err(ProviderError::Classification(format!(
            "ground truth `{ground_truth}` is not among the candidate labels"
        )));
    }
    let texts: Vec<String> = candidates.iter().map(|c| config.label_prompt(c)).collect();
    let scores = classifier
        .scores(&ClassifyRequest {
            model: config.model_name.clone(),
            image: image.clone(),
            texts,
        })
        .map_err(request_error)?;
    if scores.len() != candidates.len() {
        return Err(ProviderError::Classification(format!(
            "{} scores returned for {} labels; ground truth `{ground_truth}` cannot be located",
            scores.len(),
            candidates.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ProviderError::Classification("non-finite classifier score".into()));
    }
    let probabilities: BTreeMap<String, f64> = candidates.iter().cloned().zip(softmax(&scores)).collect();
    Ok(ClassifierResult {
        sketch_id: sketch_id.to_string(),
        ground_truth_prob: probabilities[ground_truth],
        probabilities,
    })
}

/// One sketch to annotate.
#[derive(Debug, Clone)]
pub struct AnnotationJob {
    pub sketch_id: String,
    pub class_name: String,
    pub image: Image,
}

fn pool(config: &ProviderConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_parallel.max(1))
        .build()
        .map_err(|e| ProviderError::Config(format!("cannot start worker pool: {e}")))
}

/// Annotates `jobs` with at most `max_parallel` requests in flight. Results
/// come back in job order.
pub fn annotate_batch(
    jobs: &[AnnotationJob],
    db: &CommonsenseDB,
    config: &ProviderConfig,
    chat: &dyn ChatTransport,
) -> Result<Vec<Result<VqaResult>>> {
    Ok(pool(config)?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let elements = db.elements(&job.class_name).ok_or_else(|| ProviderError::UnknownClass {
                    sketch_id: job.sketch_id.clone(),
                    class: job.class_name.clone(),
                })?;
                annotate_elements(&job.sketch_id, &job.image, &job.class_name, elements, config, chat)
            })
            .collect()
    }))
}

/// Classifies `jobs` against the full class list of `db`.
pub fn classify_batch(
    jobs: &[AnnotationJob],
    db: &CommonsenseDB,
    config: &ProviderConfig,
    classifier: &dyn ClassifierTransport,
) -> Result<Vec<Result<ClassifierResult>>> {
    let candidates: Vec<String> = db.class_names().map(str::to_string).collect();
    Ok(pool(config)?.install(|| {
        jobs.par_iter()
            .map(|job| classify(&job.sketch_id, &job.image, &candidates, &job.class_name, config, classifier))
            .collect()
    }))
}
