//! Offline signal source: E from the database, V from annotated presence,
//! P from a `{sketch_id: probability}` sidecar.

use std::collections::BTreeMap;
use std::path::Path;

use sea_core::dataset::{CommonsenseDB, SketchRecord};
use sea_core::{Signals, Source};

use crate::error::{ProviderError, Result};

pub type Probabilities = BTreeMap<String, f64>;

pub fn load_probabilities(path: impl AsRef<Path>) -> Result<Probabilities> {
    let path = path.as_ref();
    let parse_err = |message: String| ProviderError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path)?;
    let probs: Probabilities =
        serde_json::from_str(&text).map_err(|e| parse_err(format!("expected {{sketch_id: probability}}: {e}")))?;
    if let Some((id, p)) = probs.iter().find(|(_, p)| !p.is_finite()) {
        return Err(parse_err(format!("sketch `{id}`: probability {p} is not finite")));
    }
    Ok(probs)
}

pub struct FixtureProvider<'a> {
    db: &'a CommonsenseDB,
    probabilities: &'a Probabilities,
}

impl<'a> FixtureProvider<'a> {
    pub fn new(db: &'a CommonsenseDB, probabilities: &'a Probabilities) -> Self {
        Self { db, probabilities }
    }

    pub fn signals(&self, record: &SketchRecord) -> Result<Signals> {
        let e = self
            .db
            .element_count(&record.class_name)
            .ok_or_else(|| ProviderError::UnknownClass {
                sketch_id: record.sketch_id.clone(),
                class: record.class_name.clone(),
            })?;
        let p = *self
            .probabilities
            .get(&record.sketch_id)
            .ok_or_else(|| ProviderError::MissingProbability(record.sketch_id.clone()))?;
        Ok(Signals::new(e, f64::from(record.visible_count()), p, Source::Fixture))
    }

    /// Signals for every record, in record order.
    pub fn signals_for(&self, records: &[SketchRecord]) -> Result<Vec<(String, Signals)>> {
        records
            .iter()
            .map(|r| Ok((r.sketch_id.clone(), self.signals(r)?)))
            .collect()
    }
}
