//! Element-VQA benchmarking, agreement between score configurations, and
//! distribution summaries.
//!
//! Ratios whose denominator is zero are reported as `None` rather than NaN
//! or zero.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{CommonsenseDB, SketchRecord};
use crate::error::{Error, Result};
use crate::metric::ScoreBreakdown;

/// Anything carrying per-element presence judgments for one sketch.
pub trait PresenceSet {
    fn sketch_id(&self) -> &str;
    fn presence(&self) -> &BTreeMap<String, bool>;
}

impl PresenceSet for SketchRecord {
    fn sketch_id(&self) -> &str {
        &self.sketch_id
    }

    fn presence(&self) -> &BTreeMap<String, bool> {
        &self.presence
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        ClassificationMetrics {
            precision,
            recall,
            f1,
            accuracy: ratio(self.tp + self.tn, self.total()),
            specificity: ratio(self.tn, self.tn + self.fp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub counts: ConfusionCounts,
    pub metrics: ClassificationMetrics,
}

impl From<ConfusionCounts> for GroupScore {
    fn from(counts: ConfusionCounts) -> Self {
        Self {
            metrics: counts.metrics(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaReport {
    pub overall: GroupScore,
    /// Present only when a category map was supplied.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_category: BTreeMap<String, GroupScore>,
}

/// Scores predicted presence against ground truth. Every truth record needs
/// exactly one prediction with the same sketch id and the same element set.
/// With `db` given, counts are also broken down by the class category.
pub fn score_vqa<P: PresenceSet>(
    predictions: &[P],
    truth: &[SketchRecord],
    db: Option<&CommonsenseDB>,
) -> Result<VqaReport> {
    let mut by_id: HashMap<&str, &P> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.sketch_id(), p).is_some() {
            return Err(Error::Alignment(format!("duplicate prediction for sketch `{}`", p.sketch_id())));
        }
    }
    if predictions.len() != truth.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} ground-truth sketches",
            predictions.len(),
            truth.len()
        )));
    }

    let mut overall = ConfusionCounts::default();
    let mut per_category: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for record in truth {
        let pred = by_id
            .get(record.sketch_id.as_str())
            .ok_or_else(|| Error::Alignment(format!("no prediction for sketch `{}`", record.sketch_id)))?;
        let predicted = pred.presence();
        if predicted.len() != record.presence.len() || predicted.keys().any(|k| !record.presence.contains_key(k)) {
            return Err(Error::Alignment(format!(
                "sketch `{}`: predicted element set differs from ground truth",
                record.sketch_id
            )));
        }
        let mut counts = ConfusionCounts::default();
        for (id, &actual) in &record.presence {
            counts.record(predicted[id], actual);
        }
        overall.merge(&counts);
        if let Some(db) = db {
            let category = db.category(&record.class_name).ok_or_else(|| {
                Error::Alignment(format!("sketch `{}`: class `{}` has no category", record.sketch_id, record.class_name))
            })?;
            per_category.entry(category.to_string()).or_default().merge(&counts);
        }
    }
    Ok(VqaReport {
        overall: overall.into(),
        per_category: per_category.into_iter().map(|(c, n)| (c, n.into())).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
    pub ccc: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Population variance and covariance of paired samples. A constant sample
/// has variance exactly zero regardless of rounding in its mean.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let (mx, my) = (
        if is_constant(x) { x[0] } else { mx },
        if is_constant(y) { y[0] } else { my },
    );
    let n = x.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    (mx, my, sxx / n, syy / n, sxy / n)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (_, _, vx, vy, cov) = moments(x, y);
    (vx > 0.0 && vy > 0.0).then(|| (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tie_x += 1,
                (_, 0) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant + tie_x) as f64;
    let n1 = (concordant + discordant + tie_y) as f64;
    (n0 > 0.0 && n1 > 0.0).then(|| ((concordant - discordant) as f64 / (n0 * n1).sqrt()).clamp(-1.0, 1.0))
}

/// Lin's concordance correlation coefficient with population moments.
pub fn ccc(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my, vx, vy, cov) = moments(x, y);
    let den = vx + vy + (mx - my) * (mx - my);
    (den > 0.0).then(|| (2.0 * cov / den).clamp(-1.0, 1.0))
}

pub fn agreement(x: &[f64], y: &[f64]) -> Result<AgreementReport> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!("agreement needs at least 2 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("agreement inputs must be finite".into()));
    }
    Ok(AgreementReport {
        n: x.len(),
        spearman: spearman(x, y),
        pearson: pearson(x, y),
        kendall: kendall_tau_b(x, y),
        ccc: ccc(x, y),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    #[default]
    Population,
    Sample,
}

fn std_dev(xs: &[f64], kind: StdKind) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let den = match kind {
        StdKind::Population => xs.len() as f64,
        StdKind::Sample if xs.len() > 1 => (xs.len() - 1) as f64,
        StdKind::Sample => return 0.0,
    };
    (ss / den).sqrt()
}

pub const MODE_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub range: (f64, f64),
    pub mean: f64,
    pub std: f64,
    pub std_kind: StdKind,
    /// Midpoint of the fullest of 100 equal-width bins (first on ties).
    pub mode: f64,
    /// Proportions in four equal-width bins over `range`.
    pub quartile_bins: [f64; 4],
}

/// Index of the equal-width bin holding `x`; `hi` falls in the last bin.
fn bin_index(x: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    (((x - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
}

pub fn summarize_distribution(scores: &[f64], range: (f64, f64), std_kind: StdKind) -> Result<DistributionSummary> {
    if scores.is_empty() {
        return Err(Error::EmptyData("no scores to summarize"));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!("invalid range ({lo}, {hi})")));
    }
    if let Some(bad) = scores.iter().find(|s| !(lo..=hi).contains(*s)) {
        return Err(Error::InvalidInput(format!("score {bad} outside range ({lo}, {hi})")));
    }

    let mut hist = vec![0usize; MODE_BINS];
    let mut quarters = [0usize; 4];
    for &s in scores {
        hist[bin_index(s, range, MODE_BINS)] += 1;
        quarters[bin_index(s, range, 4)] += 1;
    }
    let fullest = hist
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > hist[best] { i } else { best });
    let width = (hi - lo) / MODE_BINS as f64;
    let n = scores.len() as f64;
    Ok(DistributionSummary {
        n: scores.len(),
        range,
        mean: mean(scores),
        std: std_dev(scores, std_kind),
        std_kind,
        mode: lo + (fullest as f64 + 0.5) * width,
        quartile_bins: quarters.map(|c| c as f64 / n),
    })
}

/// Gaussian kernel density on `grid`, bandwidth by Silverman's rule
/// `0.9 · min(σ, IQR/1.34) · n^(-1/5)`. Returns `None` when the sample has
/// no spread.
pub fn gaussian_kde(scores: &[f64], grid: &[f64]) -> Option<Vec<f64>> {
    if scores.len() < 2 || is_constant(scores) {
        return None;
    }
    let sigma = std_dev(scores, StdKind::Sample);
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        let next = sorted[(i + 1).min(sorted.len() - 1)];
        sorted[i] + frac * (next - sorted[i])
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    if spread <= 0.0 {
        return None;
    }
    let h = 0.9 * spread * (scores.len() as f64).powf(-0.2);
    let norm = 1.0 / (scores.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Some(
        grid.iter()
            .map(|&x| norm * scores.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>())
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64], kind: StdKind) -> Self {
        Self {
            mean: mean(xs),
            std: std_dev(xs, kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: u32,
    pub n: usize,
    pub sea: MeanStd,
    pub reward: MeanStd,
    pub penalty: MeanStd,
    pub v: MeanStd,
    #[serde(rename = "P")]
    pub p: MeanStd,
}

/// Per-level means and standard deviations, levels ascending. Any level not
/// in `allowed` is an error.
pub fn seva_level_table(
    scored: &[(u32, ScoreBreakdown)],
    allowed: &[u32],
    std_kind: StdKind,
) -> Result<Vec<LevelRow>> {
    let mut groups: BTreeMap<u32, Vec<&ScoreBreakdown>> = BTreeMap::new();
    for (level, b) in scored {
        if !allowed.contains(level) {
            return Err(Error::UnknownLevel(*level));
        }
        groups.entry(*level).or_default().push(b);
    }
    Ok(groups
        .into_iter()
        .map(|(level, rows)| {
            let col = |f: fn(&ScoreBreakdown) -> f64| MeanStd::of(&rows.iter().map(|b| f(b)).collect::<Vec<_>>(), std_kind);
            LevelRow {
                level,
                n: rows.len(),
                sea: col(|b| b.sea),
                reward: col(|b| b.reward),
                penalty: col(|b| b.penalty),
                v: col(|b| b.v),
                p: col(|b| b.p),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn soft_name(s: &str) -> String {
    s.trim().to_lowercase().replace('_', " ")
}

/// Soft precision/recall between two element-name lists: each name is
/// credited with its best normalized Levenshtein similarity in the other
/// list. Returns `None` if either list is empty.
pub fn soft_f1(predicted: &[String], reference: &[String]) -> Option<SoftF1> {
    if predicted.is_empty() || reference.is_empty() {
        return None;
    }
    let pred: Vec<String> = predicted.iter().map(|s| soft_name(s)).collect();
    let refs: Vec<String> = reference.iter().map(|s| soft_name(s)).collect();
    let best = |name: &str, pool: &[String]| {
        pool.iter()
            .map(|o| strsim::normalized_levenshtein(name, o))
            .fold(0.0, f64::max)
    };
    let precision = pred.iter().map(|p| best(p, &refs)).sum::<f64>() / pred.len() as f64;
    let recall = refs.iter().map(|r| best(r, &pred)).sum::<f64>() / refs.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Some(SoftF1 { precision, recall, f1 })
}
