//! Commonsense element database, sketch annotation records, and
//! element-frequency / lift statistics.
//!
//! The database file is a JSON array of per-class objects
//! `{"class", "total_elements", "elements": [{"id", "name", "optional", ...}]}`
//! with a sidecar `{class: category}` map. Annotations are JSONL, one
//! `{"sketch_id", "class", "caption", "presence": {id: bool}}` per line.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One commonsense element. Fields beyond `id`, `name`, `optional` and
/// `importance_score` are kept verbatim in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub optional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance_score: Option<u8>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// On-disk shape of a single class entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_elements: Option<usize>,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommonsenseDB {
    pub classes: BTreeMap<String, Vec<Element>>,
    pub category_of: BTreeMap<String, String>,
}

impl CommonsenseDB {
    /// Builds a database from class entries, enforcing id, name and count
    /// consistency. Element names and ids are trimmed, nothing more.
    pub fn from_entries(entries: Vec<ClassEntry>) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for mut entry in entries {
            entry.class = entry.class.trim().to_string();
            let class = entry.class.clone();
            if class.is_empty() {
                return Err(Error::Validation("class with empty name".into()));
            }
            if classes.contains_key(&class) {
                return Err(Error::Validation(format!("duplicate class `{class}`")));
            }
            if let Some(total) = entry.total_elements {
                if total != entry.elements.len() {
                    return Err(Error::Validation(format!(
                        "class `{class}`: total_elements is {total} but {} elements are listed",
                        entry.elements.len()
                    )));
                }
            }
            let mut seen = BTreeSet::new();
            for el in &mut entry.elements {
                el.id = el.id.trim().to_string();
                el.name = el.name.trim().to_string();
                let Some((prefix, part)) = el.id.split_once('.') else {
                    return Err(Error::Validation(format!(
                        "class `{class}`: element id `{}` is not of the form <class>.<name>",
                        el.id
                    )));
                };
                if prefix != class {
                    return Err(Error::Validation(format!(
                        "class `{class}`: element id `{}` belongs to class `{prefix}`",
                        el.id
                    )));
                }
                if part != el.name {
                    return Err(Error::Validation(format!(
                        "class `{class}`: element id `{}` does not match name `{}`",
                        el.id, el.name
                    )));
                }
                if !seen.insert(el.name.clone()) {
                    return Err(Error::Validation(format!(
                        "class `{class}`: duplicate element `{}`",
                        el.id
                    )));
                }
            }
            classes.insert(class, entry.elements);
        }
        Ok(Self {
            classes,
            category_of: BTreeMap::new(),
        })
    }

    /// Parses the JSON array form. `origin` names the source in errors.
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let raw: Vec<Value> =
            serde_json::from_str(text).map_err(|e| parse_err(format!("expected a JSON array of classes: {e}")))?;
        let mut entries = Vec::with_capacity(raw.len());
        for (i, value) in raw.into_iter().enumerate() {
            let label = value
                .get("class")
                .and_then(Value::as_str)
                .map(|c| format!("class `{c}`"))
                .unwrap_or_else(|| format!("entry {i}"));
            if let Some(Value::Array(elements)) = value.get("elements") {
                for (j, el) in elements.iter().enumerate() {
                    if let Err(e) = Element::deserialize(el) {
                        let which = el
                            .get("id")
                            .and_then(Value::as_str)
                            .map(|id| format!("element `{id}`"))
                            .unwrap_or_else(|| format!("element {j}"));
                        return Err(parse_err(format!("{label}, {which}: {e}")));
                    }
                }
            }
            let entry = ClassEntry::deserialize(value).map_err(|e| parse_err(format!("{label}: {e}")))?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn to_entries(&self) -> Vec<ClassEntry> {
        self.classes
            .iter()
            .map(|(class, elements)| ClassEntry {
                class: class.clone(),
                total_elements: Some(elements.len()),
                elements: elements.clone(),
            })
            .collect()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_entries())?)
    }

    /// Attaches a category map; every class must be covered.
    pub fn with_categories(mut self, categories: BTreeMap<String, String>) -> Result<Self> {
        let missing: Vec<&str> = self
            .classes
            .keys()
            .filter(|c| !categories.contains_key(*c))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "no category for class(es): {}",
                missing.join(", ")
            )));
        }
        self.category_of = categories
            .into_iter()
            .filter(|(c, _)| self.classes.contains_key(c))
            .collect();
        Ok(self)
    }

    pub fn elements(&self, class: &str) -> Option<&[Element]> {
        self.classes.get(class).map(Vec::as_slice)
    }

    /// E for a class.
    pub fn element_count(&self, class: &str) -> Option<u32> {
        self.classes.get(class).map(|e| e.len() as u32)
    }

    pub fn category(&self, class: &str) -> Option<&str> {
        self.category_of.get(class).map(String::as_str)
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

pub fn load_db(path: impl AsRef<Path>) -> Result<CommonsenseDB> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    CommonsenseDB::from_json_str(&text, path)
}

pub fn load_categories(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("expected a {{class: category}} object: {e}"),
    })
}

/// Loads the database and its category sidecar together.
pub fn load_db_with_categories(db: impl AsRef<Path>, categories: impl AsRef<Path>) -> Result<CommonsenseDB> {
    load_db(db)?.with_categories(load_categories(categories)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub sketch_id: String,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(default)]
    pub caption: Option<String>,
    pub presence: BTreeMap<String, bool>,
}

impl SketchRecord {
    /// V: the number of elements marked present.
    pub fn visible_count(&self) -> u32 {
        self.presence.values().filter(|&&b| b).count() as u32
    }

    /// Checks the record against the database.
    pub fn validate(&self, db: &CommonsenseDB) -> std::result::Result<(), String> {
        let elements = db
            .elements(&self.class_name)
            .ok_or_else(|| format!("sketch `{}`: unknown class `{}`", self.sketch_id, self.class_name))?;
        for id in self.presence.keys() {
            if !elements.iter().any(|e| &e.id == id) {
                return Err(format!("sketch `{}`: unknown element id `{id}`", self.sketch_id));
            }
        }
        Ok(())
    }
}

/// Parses JSONL annotations and validates each record against `db`.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_annotations<R: BufRead>(reader: R, origin: &Path, db: &CommonsenseDB) -> Result<Vec<SketchRecord>> {
    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SketchRecord = serde_json::from_str(&line).map_err(|e| Error::ParseLine {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let invalid = |message: String| Error::InvalidRecord {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        record.validate(db).map_err(invalid)?;
        if !ids.insert(record.sketch_id.clone()) {
            return Err(invalid(format!("duplicate sketch_id `{}`", record.sketch_id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_annotations(path: impl AsRef<Path>, db: &CommonsenseDB) -> Result<Vec<SketchRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    parse_annotations(BufReader::new(file), path, db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub element: String,
    pub category: String,
    pub n_e_c: usize,
    pub n_c: usize,
    pub n_e: usize,
    #[serde(rename = "N")]
    pub n_total: usize,
    pub p_cat: f64,
    pub lift: f64,
}

/// Category-wise lift of each element name over classes:
/// `lift(e, c) = (n(e,c) / n(c)) / (n(e) / N)`.
///
/// Rows with `n(e,c) < min_support` are dropped. Categories come out in
/// lexicographic order; within a category rows are sorted by descending
/// lift, then descending `n(e,c)`, then element name.
pub fn compute_lift(db: &CommonsenseDB, min_support: usize) -> Result<Vec<LiftRow>> {
    if db.category_of.is_empty() && !db.is_empty() {
        return Err(Error::Validation("lift requires a category map".into()));
    }
    let n_total = db.len();
    let mut n_c: HashMap<&str, usize> = HashMap::new();
    let mut n_e: HashMap<&str, usize> = HashMap::new();
    let mut n_ec: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (class, elements) in &db.classes {
        let category = db.category(class).unwrap_or_default();
        *n_c.entry(category).or_default() += 1;
        for el in elements {
            *n_e.entry(el.name.as_str()).or_default() += 1;
            *n_ec.entry((category, el.name.as_str())).or_default() += 1;
        }
    }

    let mut rows: Vec<LiftRow> = n_ec
        .into_iter()
        .filter(|&(_, count)| count >= min_support)
        .map(|((category, element), count)| {
            let nc = n_c[category];
            let ne = n_e[element];
            let p_cat = count as f64 / nc as f64;
            LiftRow {
                element: element.to_string(),
                category: category.to_string(),
                n_e_c: count,
                n_c: nc,
                n_e: ne,
                n_total,
                p_cat,
                lift: p_cat / (ne as f64 / n_total as f64),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.category
            .cmp(&b.category)
            .then(b.lift.total_cmp(&a.lift))
            .then(b.n_e_c.cmp(&a.n_e_c))
            .then(a.element.cmp(&b.element))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub rank: usize,
    pub element: String,
    pub n_classes: usize,
}

/// Element names ranked by the number of classes listing them.
pub fn global_frequency(db: &CommonsenseDB) -> Vec<FrequencyRow> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for elements in db.classes.values() {
        for el in elements {
            *counts.entry(el.name.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (element, n))| FrequencyRow {
            rank: i + 1,
            element: element.to_string(),
            n_classes: n,
        })
        .collect()
}

/// True if the class label (underscores read as spaces) occurs in the
/// caption on token boundaries, ignoring case and runs of whitespace.
pub fn validate_caption(caption: &str, class_name: &str) -> bool {
    let normalize = |s: &str| s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    let label = normalize(&class_name.replace('_', " "));
    if label.is_empty() {
        return false;
    }
    let text = normalize(caption);
    let is_word = |c: char| c.is_alphanumeric();
    text.match_indices(&label).any(|(start, m)| {
        let before = text[..start].chars().next_back();
        let after = text[start + m.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
