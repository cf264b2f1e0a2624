use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sea_core::analysis::{check_invariants, GridSpec};
use sea_core::dataset::{
    compute_lift, global_frequency, load_annotations, load_categories, load_db, write_csv, CommonsenseDB,
    SketchRecord,
};
use sea_core::evaluation::{agreement, score_vqa, summarize_distribution, PresenceSet, StdKind};
use sea_core::grid::{Linspace, StepRange};
use sea_core::sweeps::{
    diagonal_band_width, render_heatmap_svg, render_sweep_svg, run_heatmap, run_sweep, saturation_fraction,
    write_sweep_csv, HeatmapSpec, SvgStyle, SweepSpec,
};
use sea_core::{sea, Hyperparams, ScoreBreakdown, Signals, Source};
use sea_providers::cache::ResponseCache;
use sea_providers::fixture::{load_probabilities, FixtureProvider};
use sea_providers::ops::{annotate_batch, classify_batch, AnnotationJob};
use sea_providers::transport::Image;
use sea_providers::{chat_transport, classifier_transport, extract_commonsense, ProviderConfig};

use crate::config::RunConfig;
use crate::manifest::Run;
use crate::{Cli, Command};

pub enum Outcome {
    Ok,
    VerificationFailed,
}

/// Saturation threshold for heatmap summaries.
const SATURATION: f64 = 0.99;
/// Half-width of the near-zero band measured across the diagonal.
const BAND: f64 = 0.2;
const BAND_SAMPLES: usize = 20_001;

const LIFT_HEADER: &str = "element,category,n_e_c,n_c,n_e,N,p_cat,lift\n";
const FREQUENCY_HEADER: &str = "rank,element,n_classes\n";

struct Ctx {
    config: RunConfig,
    hp: Hyperparams,
    seed: u64,
    out: PathBuf,
    cache_dir: Option<PathBuf>,
    config_path: Option<PathBuf>,
}

impl Ctx {
    fn start(&self, command: &str, args: &impl Serialize, with_hp: bool) -> Result<Run> {
        let mut snapshot = json!({ "args": args });
        if with_hp {
            snapshot["hyperparams"] = serde_json::to_value(self.hp)?;
        }
        let mut run = Run::new(&self.out, command, snapshot, self.seed)?;
        if let Some(p) = &self.config_path {
            run.input(p);
        }
        Ok(run)
    }

    fn cache(&self) -> Result<Option<Arc<ResponseCache>>> {
        self.cache_dir
            .as_ref()
            .map(|d| Ok(Arc::new(ResponseCache::new(d)?)))
            .transpose()
    }

    fn provider(&self, what: &str) -> Result<&ProviderConfig> {
        self.config
            .provider
            .as_ref()
            .ok_or_else(|| anyhow!("{what} needs a `provider` section in --config"))
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let hp = cli.hp.apply(config.hyperparams)?;
    let ctx = Ctx {
        config,
        hp,
        seed: cli.seed,
        out: cli.out,
        cache_dir: cli.cache_dir,
        config_path: cli.config,
    };
    match cli.command {
        Command::Score(a) => score(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Heatmap(a) => heatmap(&ctx, a),
        Command::Lift(a) => lift(&ctx, a),
        Command::BenchVqa(a) => bench_vqa(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Annotate(a) => annotate(&ctx, a),
    }
}

fn load_db_opt_categories(db: &Path, categories: Option<&Path>) -> Result<CommonsenseDB> {
    let db = load_db(db)?;
    Ok(match categories {
        Some(c) => db.with_categories(load_categories(c)?)?,
        None => db,
    })
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    Ok(text)
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &str) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(header.as_bytes().to_vec());
    }
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(buf)
}

/// Reads JSON lines, reporting the file and line of the first bad one.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- score

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Commonsense element database (JSON).
    #[arg(long)]
    pub db: PathBuf,
    /// Ground-truth or predicted presence annotations (JSONL).
    #[arg(long)]
    pub annotations: PathBuf,
    /// `{sketch_id: probability}` sidecar for P.
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// Sketch images named `<sketch_id>.<ext>`, used with a classifier config when `--probs` is absent.
    #[arg(long)]
    pub images: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    sketch_id: &'a str,
    class: &'a str,
    #[serde(rename = "E")]
    e: u32,
    #[serde(rename = "V")]
    visible: f64,
    #[serde(rename = "P")]
    p: f64,
    v: f64,
    u: f64,
    g: f64,
    reward: f64,
    penalty: f64,
    z: f64,
    sea: f64,
}

impl<'a> ScoreRow<'a> {
    fn new(record: &'a SketchRecord, s: &Signals, b: &ScoreBreakdown) -> Self {
        Self {
            sketch_id: &record.sketch_id,
            class: &record.class_name,
            e: s.element_count,
            visible: s.visible_count,
            p: b.p,
            v: b.v,
            u: b.u,
            g: b.g,
            reward: b.reward,
            penalty: b.penalty,
            z: b.z,
            sea: b.sea,
        }
    }
}

fn find_image(dir: &Path, sketch_id: &str) -> Result<PathBuf> {
    ["png", "jpg", "jpeg", "webp", "svg"]
        .iter()
        .map(|ext| dir.join(format!("{sketch_id}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| anyhow!("sketch `{sketch_id}`: no image in {}", dir.display()))
}

fn jobs_for(records: &[SketchRecord], images: &Path, run: &mut Run) -> Result<Vec<AnnotationJob>> {
    records
        .iter()
        .map(|r| {
            let path = find_image(images, &r.sketch_id)?;
            run.input(&path);
            Ok(AnnotationJob {
                sketch_id: r.sketch_id.clone(),
                class_name: r.class_name.clone(),
                image: Image::load(&path)?,
            })
        })
        .collect()
}

fn classifier_signals(
    ctx: &Ctx,
    db: &CommonsenseDB,
    records: &[SketchRecord],
    images: &Path,
    run: &mut Run,
) -> Result<Vec<Signals>> {
    let config = ctx
        .config
        .classifier
        .as_ref()
        .ok_or_else(|| anyhow!("score needs --probs, or a `classifier` section in --config together with --images"))?;
    let jobs = jobs_for(records, images, run)?;
    let transport = classifier_transport(config, ctx.cache()?)?;
    let results = classify_batch(&jobs, db, config, transport.as_ref())?;
    records
        .iter()
        .zip(results)
        .map(|(r, res)| {
            let res = res.with_context(|| format!("sketch `{}`", r.sketch_id))?;
            let e = db.element_count(&r.class_name).unwrap_or(0);
            Ok(Signals::new(
                e,
                f64::from(r.visible_count()),
                res.ground_truth_prob,
                Source::Provider(config.model_name.clone()),
            ))
        })
        .collect()
}

fn score(ctx: &Ctx, args: ScoreArgs) -> Result<Outcome> {
    let mut run = ctx.start("score", &args, true)?;
    let db = load_db(&args.db)?;
    let records = load_annotations(&args.annotations, &db)?;
    run.input(&args.db);
    run.input(&args.annotations);

    let signals: Vec<Signals> = match (&args.probs, &args.images) {
        (Some(probs_path), _) => {
            run.input(probs_path);
            let probs = load_probabilities(probs_path)?;
            let provider = FixtureProvider::new(&db, &probs);
            records.iter().map(|r| provider.signals(r)).collect::<Result<_, _>>()?
        }
        (None, Some(images)) => classifier_signals(ctx, &db, &records, images, &mut run)?,
        (None, None) => bail!("score needs --probs or --images with a classifier config"),
    };

    let breakdowns = signals
        .iter()
        .zip(&records)
        .map(|(s, r)| sea(s, &ctx.hp).with_context(|| format!("sketch `{}`", r.sketch_id)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ScoreRow> = records
        .iter()
        .zip(&signals)
        .zip(&breakdowns)
        .map(|((r, s), b)| ScoreRow::new(r, s, b))
        .collect();
    run.write("scores.jsonl", jsonl(&rows)?)?;

    let values: Vec<f64> = breakdowns.iter().map(|b| b.sea).collect();
    let summary = if values.is_empty() {
        None
    } else {
        Some(summarize_distribution(&values, (-1.0, 1.0), StdKind::Population)?)
    };
    run.write_json("summary.json", &summary)?;
    run.finish()?;
    println!("scored {} sketches -> {}", rows.len(), ctx.out.join("scores.jsonl").display());
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// P grid as `lo:hi:step`.
    #[arg(long = "p-grid", default_value = "0.1:0.99:0.01")]
    pub p_grid: StepRange,
    /// v grid as `lo:hi:step`.
    #[arg(long = "v-grid", default_value = "0.05:1.0:0.01")]
    pub v_grid: StepRange,
    /// Capacities to scan.
    #[arg(long = "e-values", value_delimiter = ',', default_value = "4,8,16,32")]
    pub e_values: Vec<u32>,
    /// Rows with P at or below this must not increase in v.
    #[arg(long = "low-p-max", default_value_t = 0.3)]
    pub low_p_max: f64,
    /// Report violations without failing.
    #[arg(long)]
    pub explore: bool,
}

fn verify(ctx: &Ctx, args: VerifyArgs) -> Result<Outcome> {
    let mut run = ctx.start("verify", &args, true)?;
    let grid = GridSpec {
        p: args.p_grid,
        v: args.v_grid,
        e_values: args.e_values.clone(),
        low_p_max: args.low_p_max,
    };
    let report = check_invariants(&grid, &ctx.hp, ctx.seed)?;
    run.write_json("verify_report.json", &report)?;
    run.finish()?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} points, {} dZ/dP violations, {} low-P dZ/dv violations, {failed} failed checks",
        report.region.points_checked, report.region.monotone_p_violations, report.region.low_p_monotone_v_violations
    );
    if report.passed() || args.explore {
        Ok(Outcome::Ok)
    } else {
        eprintln!("verification failed: {failed} of {} checks", report.checks.len());
        Ok(Outcome::VerificationFailed)
    }
}

// ---------------------------------------------------------------- sweep / heatmap

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// v range as `lo:hi:step`.
    #[arg(long = "v-range", default_value = "0.05:1.0:0.005")]
    pub v_range: StepRange,
    /// P levels, one curve each.
    #[arg(long = "p-levels", value_delimiter = ',', default_value = "0.3,0.5,0.8")]
    pub p_levels: Vec<f64>,
    /// Element capacity.
    #[arg(long, default_value_t = 10)]
    pub e: u32,
}

fn sweep(ctx: &Ctx, args: SweepArgs) -> Result<Outcome> {
    let spec = SweepSpec {
        v_range: args.v_range,
        p_levels: args.p_levels.clone(),
        e: args.e,
        hyperparams: ctx.hp,
    };
    spec.validate()?;
    let mut run = ctx.start("sweep", &args, true)?;
    let rows = run_sweep(&spec)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    run.write("sweep.csv", csv)?;
    run.write("sweep.svg", render_sweep_svg(&rows, &SvgStyle::default())?)?;
    run.finish()?;
    println!("{} rows over {} curves", rows.len(), spec.p_levels.len());
    Ok(Outcome::Ok)
}

#[derive(Debug, Args, Serialize)]
pub struct HeatmapArgs {
    /// v axis as `lo:hi:n`.
    #[arg(long = "v-axis", default_value = "0.02:1.0:200")]
    pub v_axis: Linspace,
    /// P axis as `lo:hi:n`.
    #[arg(long = "p-axis", default_value = "0.02:0.98:200")]
    pub p_axis: Linspace,
    /// Factor applied to each group for the left column.
    #[arg(long = "low-factor", default_value_t = 0.5)]
    pub low_factor: f64,
    /// Factor applied to each group for the right column.
    #[arg(long = "high-factor", default_value_t = 2.0)]
    pub high_factor: f64,
}

#[derive(Serialize)]
struct PanelSummary<'a> {
    group: &'a str,
    setting: &'static str,
    saturation: f64,
    band_width: f64,
}

fn heatmap(ctx: &Ctx, args: HeatmapArgs) -> Result<Outcome> {
    let mut spec = HeatmapSpec::ablation(&ctx.hp, args.low_factor, args.high_factor);
    spec.v_axis = args.v_axis;
    spec.p_axis = args.p_axis;
    spec.validate()?;
    let mut run = ctx.start("heatmap", &args, true)?;
    let map = run_heatmap(&spec)?;
    let summary: Vec<PanelSummary> = map
        .rows
        .iter()
        .flat_map(|row| {
            row.panels.iter().map(|panel| PanelSummary {
                group: &row.group,
                setting: panel.setting.label(),
                saturation: saturation_fraction(&panel.values, SATURATION),
                band_width: diagonal_band_width(&panel.hyperparams, 0.5, BAND, BAND_SAMPLES),
            })
        })
        .collect();
    run.write_json("heatmap.json", &map)?;
    run.write("heatmap.svg", render_heatmap_svg(&map, &SvgStyle::default())?)?;
    let mut csv = Vec::new();
    write_csv(&summary, &mut csv)?;
    run.write("heatmap_summary.csv", csv)?;
    run.finish()?;
    println!("{} panels", summary.len());
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- lift

#[derive(Debug, Args, Serialize)]
pub struct LiftArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// `{class: category}` map (JSON).
    #[arg(long)]
    pub categories: PathBuf,
    /// Minimum co-occurrence count for a row.
    #[arg(long = "min-support", default_value_t = 3)]
    pub min_support: usize,
}

fn lift(ctx: &Ctx, args: LiftArgs) -> Result<Outcome> {
    let mut run = ctx.start("lift", &args, false)?;
    let db = load_db_opt_categories(&args.db, Some(&args.categories))?;
    run.input(&args.db);
    run.input(&args.categories);
    let rows = compute_lift(&db, args.min_support)?;
    let freq = global_frequency(&db);
    run.write("lift.csv", csv_bytes(&rows, LIFT_HEADER)?)?;
    run.write("global_frequency.csv", csv_bytes(&freq, FREQUENCY_HEADER)?)?;
    run.finish()?;
    println!("{} lift rows, {} distinct elements", rows.len(), freq.len());
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- bench-vqa

#[derive(Debug, Args, Serialize)]
pub struct BenchVqaArgs {
    /// Directory of `<model>.jsonl` prediction files.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth annotations (JSONL).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub db: PathBuf,
    /// `{class: category}` map for per-category breakdowns.
    #[arg(long)]
    pub categories: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    sketch_id: String,
    presence: BTreeMap<String, bool>,
}

impl PresenceSet for PredictionRow {
    fn sketch_id(&self) -> &str {
        &self.sketch_id
    }

    fn presence(&self) -> &BTreeMap<String, bool> {
        &self.presence
    }
}

#[derive(Serialize)]
struct MetricsRow {
    model: String,
    sketches: usize,
    tp: u64,
    fp: u64,
    tn: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    accuracy: Option<f64>,
    specificity: Option<f64>,
}

fn bench_vqa(ctx: &Ctx, args: BenchVqaArgs) -> Result<Outcome> {
    let mut run = ctx.start("bench-vqa", &args, false)?;
    let db = load_db_opt_categories(&args.db, args.categories.as_deref())?;
    let truth = load_annotations(&args.truth, &db)?;
    run.input(&args.db);
    run.input(&args.truth);
    if let Some(c) = &args.categories {
        run.input(c);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&args.predictions)
        .with_context(|| format!("listing {}", args.predictions.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    files.sort();
    if files.is_empty() {
        bail!("no .jsonl prediction files in {}", args.predictions.display());
    }

    let mut rows = Vec::new();
    let mut reports = BTreeMap::new();
    for path in &files {
        run.input(path);
        let model = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let predictions: Vec<PredictionRow> = read_jsonl(path)?;
        let db_ref = args.categories.as_ref().map(|_| &db);
        let report = score_vqa(&predictions, &truth, db_ref).with_context(|| format!("model `{model}`"))?;
        let (c, m) = (&report.overall.counts, &report.overall.metrics);
        rows.push(MetricsRow {
            model: model.clone(),
            sketches: predictions.len(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            accuracy: m.accuracy,
            specificity: m.specificity,
        });
        reports.insert(model, report);
    }
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    run.write("metrics.csv", csv)?;
    run.write_json("metrics.json", &reports)?;
    run.finish()?;
    for r in &rows {
        println!("{}: f1 {}", r.model, r.f1.map_or("undefined".into(), |f| format!("{f:.4}")));
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// First score file (JSONL with `sketch_id`).
    #[arg(long)]
    pub a: PathBuf,
    /// Second score file.
    #[arg(long)]
    pub b: PathBuf,
    /// Numeric field to compare.
    #[arg(long, default_value = "sea")]
    pub field: String,
}

fn score_column(path: &Path, field: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, row) in read_jsonl::<Value>(path)?.into_iter().enumerate() {
        let at = || format!("{} record {}", path.display(), i + 1);
        let id = row
            .get("sketch_id")
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("{}: missing sketch_id", at()))?;
        let x = row
            .get(field)
            .and_then(Value::as_f64)
            .ok_or_else(|| anyhow!("{}: missing numeric field `{field}`", at()))?;
        if out.insert(id.to_string(), x).is_some() {
            bail!("{}: duplicate sketch `{id}`", at());
        }
    }
    Ok(out)
}

fn compare(ctx: &Ctx, args: CompareArgs) -> Result<Outcome> {
    let mut run = ctx.start("compare", &args, false)?;
    let a = score_column(&args.a, &args.field)?;
    let b = score_column(&args.b, &args.field)?;
    run.input(&args.a);
    run.input(&args.b);
    let ids_a: BTreeSet<&String> = a.keys().collect();
    let ids_b: BTreeSet<&String> = b.keys().collect();
    if ids_a != ids_b {
        let only_a = ids_a.difference(&ids_b).count();
        let only_b = ids_b.difference(&ids_a).count();
        let example = ids_a.symmetric_difference(&ids_b).next().map_or("", |s| s.as_str());
        return Err(sea_core::Error::Alignment(format!(
            "sketch ids differ: {only_a} only in a, {only_b} only in b (e.g. `{example}`)"
        ))
        .into());
    }
    let x: Vec<f64> = a.values().copied().collect();
    let y: Vec<f64> = b.values().copied().collect();
    let report = agreement(&x, &y)?;
    run.write_json("agreement.json", &json!({ "field": args.field, "report": report }))?;
    run.finish()?;
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
    println!(
        "n={} spearman={} pearson={} kendall={} ccc={}",
        report.n,
        show(report.spearman),
        show(report.pearson),
        show(report.kendall),
        show(report.ccc)
    );
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- extract / annotate

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Class names, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "classes_file")]
    pub classes: Vec<String>,
    /// File with one class name per line.
    #[arg(long = "classes-file")]
    pub classes_file: Option<PathBuf>,
}

fn extract(ctx: &Ctx, args: ExtractArgs) -> Result<Outcome> {
    let config = ctx.provider("extract")?;
    let mut run = ctx.start("extract", &json!({ "args": &args, "provider": config }), false)?;
    let classes: Vec<String> = match &args.classes_file {
        Some(path) => {
            run.input(path);
            fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect()
        }
        None => args.classes.iter().map(|c| c.trim().to_string()).collect(),
    };
    if classes.is_empty() {
        bail!("no classes given");
    }
    let chat = chat_transport(config, ctx.cache()?)?;
    let entries = classes
        .iter()
        .map(|c| extract_commonsense(c, config, chat.as_ref()).with_context(|| format!("class `{c}`")))
        .collect::<Result<Vec<_>>>()?;
    let db = CommonsenseDB::from_entries(entries)?;
    let mut text = db.to_json_pretty()?;
    text.push('\n');
    run.write("db.json", text)?;
    run.finish()?;
    println!("{} classes, {} elements", db.len(), db.class_names().filter_map(|c| db.element_count(c)).sum::<u32>());
    Ok(Outcome::Ok)
}

#[derive(Debug, Args, Serialize)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// JSONL of `{sketch_id, class, image}`; image paths are relative to this file.
    #[arg(long)]
    pub sketches: PathBuf,
    /// Also compute P with the configured classifier.
    #[arg(long)]
    pub classify: bool,
}

#[derive(Debug, Deserialize)]
struct SketchInput {
    sketch_id: String,
    class: String,
    image: PathBuf,
}

fn annotate(ctx: &Ctx, args: AnnotateArgs) -> Result<Outcome> {
    let config = ctx.provider("annotate")?;
    let classifier = if args.classify {
        Some(
            ctx.config
                .classifier
                .as_ref()
                .ok_or_else(|| anyhow!("--classify needs a `classifier` section in --config"))?,
        )
    } else {
        None
    };
    let snapshot = json!({ "args": &args, "provider": config, "classifier": classifier });
    let mut run = ctx.start("annotate", &snapshot, false)?;
    let db = load_db(&args.db)?;
    run.input(&args.db);
    run.input(&args.sketches);
    let base = args.sketches.parent().unwrap_or(Path::new("."));
    let inputs: Vec<SketchInput> = read_jsonl(&args.sketches)?;
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::with_capacity(inputs.len());
    for s in &inputs {
        if !seen.insert(s.sketch_id.as_str()) {
            bail!("{}: duplicate sketch `{}`", args.sketches.display(), s.sketch_id);
        }
        if db.elements(&s.class).is_none() {
            bail!("sketch `{}`: class `{}` is not in the database", s.sketch_id, s.class);
        }
        let path = base.join(&s.image);
        run.input(&path);
        jobs.push(AnnotationJob {
            sketch_id: s.sketch_id.clone(),
            class_name: s.class.clone(),
            image: Image::load(&path).with_context(|| format!("sketch `{}`: {}", s.sketch_id, path.display()))?,
        });
    }

    let cache = ctx.cache()?;
    let chat = chat_transport(config, cache.clone())?;
    let results = annotate_batch(&jobs, &db, config, chat.as_ref())?;
    let mut predictions = Vec::with_capacity(results.len());
    for (job, res) in jobs.iter().zip(results) {
        predictions.push(res.with_context(|| format!("sketch `{}`", job.sketch_id))?);
    }
    let annotations: Vec<SketchRecord> = jobs
        .iter()
        .zip(&predictions)
        .map(|(j, p)| SketchRecord {
            sketch_id: j.sketch_id.clone(),
            class_name: j.class_name.clone(),
            caption: None,
            presence: p.presence.clone(),
        })
        .collect();
    run.write("predictions.jsonl", jsonl(&predictions)?)?;
    run.write("annotations.jsonl", jsonl(&annotations)?)?;

    if let Some(cconf) = classifier {
        let transport = classifier_transport(cconf, cache)?;
        let results = classify_batch(&jobs, &db, cconf, transport.as_ref())?;
        let mut probs = BTreeMap::new();
        for (job, res) in jobs.iter().zip(results) {
            let res = res.with_context(|| format!("sketch `{}`", job.sketch_id))?;
            probs.insert(res.sketch_id, res.ground_truth_prob);
        }
        run.write_json("probs.json", &probs)?;
    }
    run.finish()?;
    println!("annotated {} sketches", predictions.len());
    Ok(Outcome::Ok)
}
