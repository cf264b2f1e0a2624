//! One-dimensional sweeps over the visual ratio and 5×3 hyperparameter
//! ablation heatmaps.

mod svg;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use svg::{render_heatmap_svg, render_panels_svg, render_sweep_svg, AxisValues, HeatPanel, SvgStyle};

use crate::error::{Error, Result};
use crate::grid::{Linspace, StepRange};
use crate::metric::{score_at, Hyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub v_range: StepRange,
    pub p_levels: Vec<f64>,
    pub e: u32,
    pub hyperparams: Hyperparams,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            v_range: StepRange::new(0.05, 1.0, 0.005),
            p_levels: vec![0.3, 0.5, 0.8],
            e: 10,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.v_range.validate()?;
        if self.v_range.lo <= 0.0 || self.v_range.hi > 1.0 {
            return Err(Error::InvalidGrid(format!(
                "sweep v range {} must satisfy lo > 0 and hi <= 1",
                self.v_range
            )));
        }
        if self.p_levels.is_empty() {
            return Err(Error::InvalidGrid("at least one P level is required".into()));
        }
        if let Some(p) = self.p_levels.iter().find(|p| !(p.is_finite() && **p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidGrid(format!("P level {p} must lie in (0, 1)")));
        }
        if self.e == 0 {
            return Err(Error::InvalidCapacity(0));
        }
        self.hyperparams.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "P_level")]
    pub p_level: f64,
    pub v: f64,
    pub sea: f64,
}

/// Score along `v` for each recognizability level, grouped by level.
///
/// `E` is recorded in `SweepSpec` but does not enter the curve: the score sees
/// `E` only through `v`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let vs = spec.v_range.points();
    Ok(spec
        .p_levels
        .iter()
        .flat_map(|&p| {
            vs.iter().map(move |&v| SweepRow {
                p_level: p,
                v,
                sea: score_at(p, v, &spec.hyperparams),
            })
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Low,
    Default,
    High,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Low, Setting::Default, Setting::High];

    pub fn label(self) -> &'static str {
        match self {
            Setting::Low => "low",
            Setting::Default => "default",
            Setting::High => "high",
        }
    }
}

/// One row of the ablation grid: a parameter group at three settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: String,
    pub low: Hyperparams,
    pub default: Hyperparams,
    pub high: Hyperparams,
}

impl AblationRow {
    pub fn get(&self, setting: Setting) -> &Hyperparams {
        match setting {
            Setting::Low => &self.low,
            Setting::Default => &self.default,
            Setting::High => &self.high,
        }
    }
}

/// Parameter groups varied together, one per heatmap row.
pub const ABLATION_GROUPS: [&str; 5] = ["alpha", "beta", "lambda_eta_k", "tau_r", "gamma"];

fn scale_group(base: &Hyperparams, group: &str, factor: f64) -> Hyperparams {
    let mut hp = *base;
    match group {
        "alpha" => hp.alpha *= factor,
        "beta" => hp.beta *= factor,
        "lambda_eta_k" => {
            hp.lambda *= factor;
            hp.eta *= factor;
            hp.k *= factor;
        }
        "tau_r" => {
            hp.tau *= factor;
            hp.r *= factor;
        }
        "gamma" => hp.gamma *= factor,
        _ => unreachable!("unknown ablation group {group}"),
    }
    hp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub v_axis: Linspace,
    pub p_axis: Linspace,
    pub rows: Vec<AblationRow>,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self::ablation(&Hyperparams::default(), 0.5, 2.0)
    }
}

impl HeatmapSpec {
    /// The five-group ablation: every group scaled by `low_factor` (left
    /// column) and `high_factor` (right column) around `base`.
    pub fn ablation(base: &Hyperparams, low_factor: f64, high_factor: f64) -> Self {
        Self {
            v_axis: Linspace::new(0.02, 1.0, 200),
            p_axis: Linspace::new(0.02, 0.98, 200),
            rows: ABLATION_GROUPS
                .iter()
                .map(|&group| AblationRow {
                    group: group.to_string(),
                    low: scale_group(base, group, low_factor),
                    default: *base,
                    high: scale_group(base, group, high_factor),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.v_axis.validate()?;
        self.p_axis.validate()?;
        if self.v_axis.lo < 0.0 || self.v_axis.hi > 1.0 || self.p_axis.lo < 0.0 || self.p_axis.hi > 1.0 {
            return Err(Error::InvalidGrid("heatmap axes must lie within [0, 1]".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::InvalidGrid("heatmap needs at least one ablation row".into()));
        }
        for row in &self.rows {
            for s in Setting::ALL {
                row.get(s).validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapPanel {
    pub setting: Setting,
    pub hyperparams: Hyperparams,
    /// `values[i][j]` is the score at `p_axis[i]`, `v_axis[j]`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub group: String,
    pub panels: Vec<HeatmapPanel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub v_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub rows: Vec<HeatmapRow>,
}

fn score_grid(ps: &[f64], vs: &[f64], hp: &Hyperparams) -> Vec<Vec<f64>> {
    ps.par_iter()
        .map(|&p| vs.iter().map(|&v| score_at(p, v, hp)).collect())
        .collect()
}

/// Evaluates every (row, setting) panel over the `(P, v)` grid.
pub fn run_heatmap(spec: &HeatmapSpec) -> Result<Heatmap> {
    spec.validate()?;
    let vs = spec.v_axis.points();
    let ps = spec.p_axis.points();
    let rows = spec
        .rows
        .iter()
        .map(|row| HeatmapRow {
            group: row.group.clone(),
            panels: Setting::ALL
                .iter()
                .map(|&setting| HeatmapPanel {
                    setting,
                    hyperparams: *row.get(setting),
                    values: score_grid(&ps, &vs, row.get(setting)),
                })
                .collect(),
        })
        .collect();
    Ok(Heatmap {
        v_axis: vs,
        p_axis: ps,
        rows,
    })
}

/// Fraction of cells with `|score| > threshold`.
pub fn saturation_fraction(values: &[Vec<f64>], threshold: f64) -> f64 {
    let total: usize = values.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let hits = values.iter().flatten().filter(|x| x.abs() > threshold).count();
    hits as f64 / total as f64
}

/// Length of the stretch with `|score| < threshold` along the normal to the
/// `v = P` diagonal through `(center, center)`, sampled at `samples` points.
pub fn diagonal_band_width(hp: &Hyperparams, center: f64, threshold: f64, samples: usize) -> f64 {
    let reach = center.min(1.0 - center) * std::f64::consts::SQRT_2;
    let step = 2.0 * reach / (samples - 1) as f64;
    let inside = (0..samples)
        .filter(|&i| {
            let t = -reach + i as f64 * step;
            let v = center + t / std::f64::consts::SQRT_2;
            let p = center - t / std::f64::consts::SQRT_2;
            score_at(p, v, hp).abs() < threshold
        })
        .count();
    inside as f64 * step
}
