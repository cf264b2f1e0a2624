//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sea_core::analysis::{
    analytic_derivatives, dz_dv_sign_changes, fd_derivatives, verify_monotonicity_p, GridSpec,
};
use sea_core::dataset::{compute_lift, ClassEntry, CommonsenseDB, Element, SketchRecord};
use sea_core::evaluation::{agreement, ccc, score_vqa};
use sea_core::metric::{breakdown_at, score_at};
use sea_core::sweeps::{diagonal_band_width, run_heatmap, run_sweep, saturation_fraction, HeatmapSpec, Setting, SweepSpec};
use sea_core::{sea, Hyperparams, Signals, Source};
use sea_providers::prompts::*;
use sea_providers::{ExtractionPrompt, YesNoTemplate};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn monotonicity_grid() -> Outcome {
    let hp = Hyperparams::default();
    let grid = GridSpec::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let report = pool.install(|| verify_monotonicity_p(&grid, &hp)).unwrap();
    let elapsed = start.elapsed();
    outcome(
        report.monotone_p_violations == 0 && elapsed < Duration::from_secs(30),
        format!(
            "{} points, {} violations of dZ/dP >= -1e-9, min dZ/dP {:.3e}, {:.2}s single-threaded",
            report.points_checked,
            report.monotone_p_violations,
            report.min_dz_dp,
            elapsed.as_secs_f64()
        ),
    )
}

fn derivative_correctness() -> Outcome {
    let hp = Hyperparams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.gen_range(0.01..0.99);
        let v = rng.gen_range(0.01..0.99);
        let a = analytic_derivatives(p, v, &hp).unwrap();
        let f = fd_derivatives(p, v, &hp, 1e-6).unwrap().pair;
        for (x, y) in [(a.dz_dp, f.dz_dp), (a.dz_dv, f.dz_dv)] {
            worst = worst.max((x - y).abs() / x.abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        worst <= 1e-5,
        format!("max relative |analytic - central FD| over 1000 points = {worst:.3e} (limit 1e-5)"),
    )
}

fn sweep_shape() -> Vec<(String, Outcome)> {
    let hp = Hyperparams::default();
    let rows = run_sweep(&SweepSpec::default()).unwrap();
    let curve = |p: f64| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.p_level == p).map(|r| (r.v, r.sea)).collect()
    };
    let low = curve(0.3);
    let decreasing = low.windows(2).all(|w| w[1].1 < w[0].1);
    let vs: Vec<f64> = curve(0.8).iter().map(|r| r.0).collect();
    let changes = dz_dv_sign_changes(0.8, &vs, &hp);
    let max_slope = |lo: f64, hi: f64| -> f64 {
        curve(0.5)
            .iter()
            .filter(|(v, _)| *v >= lo - 1e-12 && *v <= hi + 1e-12)
            .map(|&(v, _)| analytic_derivatives(0.5, v, &hp).unwrap().ds_dv.abs())
            .fold(0.0, f64::max)
    };
    let (early, late) = (max_slope(0.05, 0.3), max_slope(0.6, 1.0));
    vec![
        ("3a".into(), outcome(decreasing, format!("P=0.3 curve strictly decreasing over {} points", low.len()))),
        ("3b".into(), outcome(changes == 1, format!("P=0.8 dZ/dv sign changes = {changes}"))),
        (
            "3c".into(),
            outcome(
                early < late,
                format!("P=0.5 max |dSEA/dv|: {early:.4} on [0.05,0.3] vs {late:.4} on [0.6,1.0] (needs first < second)"),
            ),
        ),
    ]
}

fn extreme_limits() -> Outcome {
    let hp = Hyperparams::default();
    let eps = hp.epsilon_clip;
    let limit_err = [0.1, 0.5, 0.9]
        .iter()
        .map(|&v| (breakdown_at(eps, v, &hp).z + (hp.lambda * f64::powf(v, hp.eta) + hp.tau)).abs())
        .fold(0.0, f64::max);
    let reward_at_full = (0..=100)
        .map(|i| breakdown_at((i as f64 / 100.0).clamp(eps, 1.0 - eps), 1.0, &hp).reward.abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out_of_range = 0usize;
    for _ in 0..1_000_000 {
        let e = rng.gen_range(1..=64u32);
        let s = Signals::new(e, rng.gen_range(0.0..=f64::from(e)), rng.gen_range(0.0..=1.0), Source::Mock);
        let score = sea(&s, &hp).unwrap().sea;
        if !(score > -1.0 && score < 1.0) {
            out_of_range += 1;
        }
    }
    outcome(
        limit_err <= 1e-3 && reward_at_full <= 1e-5 && out_of_range == 0,
        format!(
            "max |Z + (lambda v^eta + tau)| at P=eps {limit_err:.2e}; max |reward| at v=1 {reward_at_full:.2e}; {out_of_range} of 10^6 scores outside (-1,1)"
        ),
    )
}

fn level_trend() -> Outcome {
    let hp = Hyperparams::default();
    let scores: Vec<f64> = [(0.22, 0.17), (0.31, 0.37), (0.40, 0.64), (0.45, 0.75)]
        .iter()
        .map(|&(v, p)| score_at(p, v, &hp))
        .collect();
    outcome(
        scores.windows(2).all(|w| w[1] > w[0]),
        format!("SEA at per-level means = {scores:.4?}"),
    )
}

fn element(class: &str, name: &str) -> Element {
    Element {
        id: format!("{class}.{name}"),
        name: name.into(),
        optional: false,
        importance_score: None,
        extra: Default::default(),
    }
}

fn lift_oracle() -> Outcome {
    let mut entries = Vec::new();
    let mut categories = BTreeMap::new();
    for i in 0..300 {
        let class = format!("class_{i:03}");
        let mut elements = vec![element(&class, "body")];
        if i < 4 {
            elements.push(element(&class, "abdomen"));
        }
        categories.insert(class.clone(), if i < 61 { "animal" } else { "object" }.to_string());
        entries.push(ClassEntry {
            class,
            total_elements: Some(elements.len()),
            elements,
        });
    }
    let db = CommonsenseDB::from_entries(entries).unwrap().with_categories(categories).unwrap();
    let rows = compute_lift(&db, 3).unwrap();
    let Some(row) = rows.iter().find(|r| r.element == "abdomen" && r.category == "animal") else {
        return outcome(false, "no abdomen/animal row");
    };
    outcome(
        (row.lift - 4.92).abs() <= 0.005 && (row.p_cat - 0.066).abs() <= 0.001,
        format!(
            "abdomen/animal: n_e_c={} n_c={} n_e={} N={} lift={:.4} p_cat={:.4}",
            row.n_e_c, row.n_c, row.n_e, row.n_total, row.lift, row.p_cat
        ),
    )
}

fn vqa_arithmetic() -> Outcome {
    // tp=3, fp=1, fn=2, tn=4 over one ten-element sketch.
    let pattern = [
        (true, true),
        (true, true),
        (true, true),
        (true, false),
        (false, true),
        (false, true),
        (false, false),
        (false, false),
        (false, false),
        (false, false),
    ];
    let mut pred = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for (i, (p, t)) in pattern.iter().enumerate() {
        pred.insert(format!("thing.e{i}"), *p);
        truth.insert(format!("thing.e{i}"), *t);
    }
    let record = |presence| SketchRecord {
        sketch_id: "s1".into(),
        class_name: "thing".into(),
        caption: None,
        presence,
    };
    let report = score_vqa(&[record(pred)], &[record(truth)], None).unwrap();
    let m = report.overall.metrics;
    let (p, r, f, a) = (m.precision.unwrap(), m.recall.unwrap(), m.f1.unwrap(), m.accuracy.unwrap());
    outcome(
        (p - 0.75).abs() < 1e-12 && (r - 0.6).abs() < 1e-12 && (f - 0.6667).abs() <= 1e-4 && (a - 0.7).abs() < 1e-12,
        format!("precision {p:.4} recall {r:.4} f1 {f:.4} accuracy {a:.4}"),
    )
}

fn agreement_suite() -> Outcome {
    let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.1).collect();
    let same = agreement(&x, &x).unwrap();
    let identical = [same.spearman, same.pearson, same.kendall, same.ccc]
        .iter()
        .all(|c| c.is_some_and(|c| (c - 1.0).abs() < 1e-12));
    let asc: Vec<f64> = (0..20).map(f64::from).collect();
    let desc: Vec<f64> = asc.iter().rev().copied().collect();
    let rev = agreement(&asc, &desc).unwrap();
    let reversed = rev.spearman == Some(-1.0) && rev.kendall == Some(-1.0);
    let a = [
        0.12, 0.35, 0.41, 0.58, 0.63, 0.07, 0.91, 0.77, 0.29, 0.50, 0.44, 0.86, 0.19, 0.68, 0.95, 0.33, 0.72, 0.24,
        0.81, 0.55,
    ];
    let b = [
        0.10, 0.40, 0.38, 0.61, 0.70, 0.15, 0.88, 0.70, 0.25, 0.47, 0.52, 0.90, 0.22, 0.60, 0.99, 0.30, 0.79, 0.20,
        0.75, 0.58,
    ];
    // 50-digit reference value.
    let expected = 0.980_585_718_986_508_7;
    let got = ccc(&a, &b).unwrap();
    outcome(
        identical && reversed && (got - expected).abs() <= 1e-9,
        format!("identical -> all 1.0: {identical}; reversed -> -1.0: {reversed}; CCC {got:.15} vs {expected:.15}"),
    )
}

fn heatmap_ablation() -> Outcome {
    let map = run_heatmap(&HeatmapSpec::default()).unwrap();
    let row = |g: &str| map.rows.iter().find(|r| r.group == g).unwrap();
    let order = [Setting::Low, Setting::Default, Setting::High];
    let alpha = row("alpha");
    let sat: Vec<f64> = order
        .iter()
        .map(|s| {
            let panel = alpha.panels.iter().find(|p| p.setting == *s).unwrap();
            saturation_fraction(&panel.values, 0.99)
        })
        .collect();
    let beta = row("beta");
    let band: Vec<f64> = order
        .iter()
        .map(|s| {
            let panel = beta.panels.iter().find(|p| p.setting == *s).unwrap();
            diagonal_band_width(&panel.hyperparams, 0.5, 0.2, 20_001)
        })
        .collect();
    outcome(
        sat[0] < sat[1] && sat[1] < sat[2] && band[2] < band[1] && band[1] < band[0],
        format!("alpha saturation low/default/high {sat:.4?}; beta band width low/default/high {band:.4?}"),
    )
}

fn offline_end_to_end() -> Outcome {
    let root = workspace();
    let bundle = root.join("fixtures/bundle");
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_sea"))
        .arg("score")
        .arg("--db")
        .arg(bundle.join("db.json"))
        .arg("--annotations")
        .arg(bundle.join("annotations.jsonl"))
        .arg("--probs")
        .arg(bundle.join("probs.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let produced = fs::read(out.path().join("scores.jsonl")).unwrap_or_default();
    let golden = fs::read(bundle.join("golden/scores.jsonl")).unwrap();
    let valid = std::str::from_utf8(&produced)
        .map(|t| t.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()))
        .unwrap_or(false);
    outcome(
        status.status.success() && valid && produced == golden && elapsed < Duration::from_secs(5),
        format!(
            "exit {:?}, {} bytes, golden match {}, {:.2}s",
            status.status.code(),
            produced.len(),
            produced == golden,
            elapsed.as_secs_f64()
        ),
    )
}

fn prompt_fidelity() -> Outcome {
    let dir = workspace().join("crates/providers/tests/golden");
    let read = |rel: &str| fs::read_to_string(dir.join(rel)).unwrap_or_default();
    let zebra: Vec<Element> = ["head", "stripes", "tail"].iter().map(|n| element("zebra", n)).collect();
    let cone = element("ice_cream_cone", "waffle_pattern");
    let cases: Vec<(String, String)> = vec![
        (format!("{EXTRACTION_STRUCTURED}\n"), read("templates/extraction_structured.txt")),
        (format!("{EXTRACTION_DETAILED}\n"), read("templates/extraction_detailed.txt")),
        (format!("{ANNOTATION_STRUCTURED_JSON}\n"), read("templates/annotation_structured_json.txt")),
        (format!("{ANNOTATION_YES_NO}\n"), read("templates/annotation_yes_no.txt")),
        (format!("{ANNOTATION_MOLMO}\n"), read("templates/annotation_molmo.txt")),
        (
            render_extraction(ExtractionPrompt::StructuredAnalyzer, "zebra") + "\n",
            read("rendered/extraction_structured_zebra.txt"),
        ),
        (
            render_extraction(ExtractionPrompt::DetailedInventory, "ice_cream_cone") + "\n",
            read("rendered/extraction_detailed_ice_cream_cone.txt"),
        ),
        (
            render_structured_annotation("zebra", &zebra) + "\n",
            read("rendered/annotation_structured_json_zebra.txt"),
        ),
        (
            render_molmo("zebra", "zebra_0001.png", &zebra) + "\n",
            read("rendered/annotation_molmo_zebra.txt"),
        ),
        (
            render_yes_no(YesNoTemplate::Standard, "ice_cream_cone", &cone) + "\n",
            read("rendered/annotation_yes_no_ice_cream_cone.txt"),
        ),
    ];
    let matched = cases.iter().filter(|(a, b)| a == b).count();
    outcome(matched == cases.len(), format!("{matched}/{} prompts byte-match their golden files", cases.len()))
}

fn main() {
    let mut results: Vec<(String, Outcome)> = vec![
        ("1".into(), monotonicity_grid()),
        ("2".into(), derivative_correctness()),
    ];
    results.extend(sweep_shape());
    results.extend([
        ("4".into(), extreme_limits()),
        ("5".into(), level_trend()),
        ("6".into(), lift_oracle()),
        ("7".into(), vqa_arithmetic()),
        ("8".into(), agreement_suite()),
        ("9".into(), heatmap_ablation()),
        ("10".into(), offline_end_to_end()),
        ("11".into(), prompt_fidelity()),
    ]);
    let mut failed = 0;
    for (id, o) in &results {
        println!("{} criterion {id}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
