//! Minimal self-contained SVG rendering for sweep curves and heatmap panels.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Heatmap, SweepRow};
use crate::error::{Error, Result};

/// Rendering options. The heatmap palette is a fixed three-stop diverging
/// interpolation: `palette[0]` at the low end of the value range,
/// `palette[1]` at its midpoint (zero for scores), `palette[2]` at the top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    pub panel_width: f64,
    pub panel_height: f64,
    pub margin: f64,
    pub font_size: f64,
    pub palette: [String; 3],
    /// Number of discrete color levels; adjacent equal cells are merged.
    pub levels: usize,
    pub line_colors: Vec<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            panel_width: 240.0,
            panel_height: 240.0,
            margin: 48.0,
            font_size: 11.0,
            palette: ["#2166ac".into(), "#ffffff".into(), "#b2182b".into()],
            levels: 65,
            line_colors: vec![
                "#1b9e77".into(),
                "#d95f02".into(),
                "#7570b3".into(),
                "#e7298a".into(),
                "#66a61e".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisValues {
    Numeric(Vec<f64>),
    Labels(Vec<String>),
}

impl AxisValues {
    fn len(&self) -> usize {
        match self {
            AxisValues::Numeric(v) => v.len(),
            AxisValues::Labels(v) => v.len(),
        }
    }
}

/// A single colored-cell raster. `values[i][j]` sits at `y[i]`, `x[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatPanel {
    pub title: String,
    pub x_name: String,
    pub y_name: String,
    pub x: AxisValues,
    pub y: AxisValues,
    pub values: Vec<Vec<f64>>,
    pub range: (f64, f64),
}

fn num(x: f64) -> String {
    format!("{x:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn parse_hex(c: &str) -> [f64; 3] {
    let c = c.trim_start_matches('#');
    let channel = |i: usize| u8::from_str_radix(c.get(i..i + 2).unwrap_or("00"), 16).unwrap_or(0) as f64;
    [channel(0), channel(2), channel(4)]
}

struct Palette {
    stops: [[f64; 3]; 3],
    levels: usize,
}

impl Palette {
    fn new(style: &SvgStyle) -> Self {
        Self {
            stops: [
                parse_hex(&style.palette[0]),
                parse_hex(&style.palette[1]),
                parse_hex(&style.palette[2]),
            ],
            levels: style.levels.max(2),
        }
    }

    fn level(&self, value: f64, (lo, hi): (f64, f64)) -> usize {
        let t = if hi > lo { ((value - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        (t * (self.levels - 1) as f64).round() as usize
    }

    fn color(&self, level: usize) -> String {
        let t = level as f64 / (self.levels - 1) as f64;
        let (a, b, s) = if t <= 0.5 {
            (self.stops[0], self.stops[1], t * 2.0)
        } else {
            (self.stops[1], self.stops[2], (t - 0.5) * 2.0)
        };
        let mix = |i: usize| (a[i] + (b[i] - a[i]) * s).round() as u8;
        format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
    }
}

fn open_svg(out: &mut String, width: f64, height: f64, style: &SvgStyle) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="{fs}">"#,
        w = num(width),
        h = num(height),
        fs = num(style.font_size)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
        num(x),
        num(y),
        escape(body)
    );
}

/// Line chart, one polyline per recognizability level, with a legend.
pub fn render_sweep_svg(rows: &[SweepRow], style: &SvgStyle) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyData("sweep table is empty"));
    }
    let mut levels: Vec<f64> = Vec::new();
    for r in rows {
        if !levels.contains(&r.p_level) {
            levels.push(r.p_level);
        }
    }
    let (v_lo, v_hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.v), hi.max(r.v)));
    let span = if v_hi > v_lo { v_hi - v_lo } else { 1.0 };

    let m = style.margin;
    let (w, h) = (style.panel_width * 2.0, style.panel_height * 1.5);
    let (width, height) = (w + 2.0 * m + 120.0, h + 2.0 * m);
    let x_of = |v: f64| m + (v - v_lo) / span * w;
    let y_of = |s: f64| m + (1.0 - (s + 1.0) / 2.0) * h;

    let mut out = String::new();
    open_svg(&mut out, width, height, style);
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(m),
        num(m),
        num(w),
        num(h)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{y0}" x2="{}" y2="{y0}" stroke="#999" stroke-dasharray="4 3"/>"##,
        num(m),
        num(m + w),
        y0 = num(y_of(0.0))
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        text(&mut out, m - 6.0, y_of(tick) + 4.0, "end", &num(tick));
    }
    for tick in [v_lo, v_lo + span / 2.0, v_lo + span] {
        text(&mut out, x_of(tick), m + h + 16.0, "middle", &num(tick));
    }
    text(&mut out, m + w / 2.0, height - 8.0, "middle", "visual ratio v");
    text(&mut out, 14.0, m - 12.0, "start", "SEA");

    for (k, &level) in levels.iter().enumerate() {
        let color = &style.line_colors[k % style.line_colors.len().max(1)];
        let points: Vec<String> = rows
            .iter()
            .filter(|r| r.p_level == level)
            .map(|r| format!("{},{}", num(x_of(r.v)), num(y_of(r.sea))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = m + 10.0 + k as f64 * 18.0;
        let lx = m + w + 16.0;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            num(lx),
            num(ly),
            num(lx + 24.0),
            num(ly)
        );
        text(&mut out, lx + 30.0, ly + 4.0, "start", &format!("P = {level}"));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn draw_panel(out: &mut String, panel: &HeatPanel, ox: f64, oy: f64, style: &SvgStyle, palette: &Palette) {
    let (w, h) = (style.panel_width, style.panel_height);
    let ny = panel.values.len();
    let nx = panel.values.first().map_or(0, Vec::len);
    let cw = w / nx.max(1) as f64;
    let ch = h / ny.max(1) as f64;

    text(out, ox + w / 2.0, oy - 8.0, "middle", &panel.title);
    for (i, row) in panel.values.iter().enumerate() {
        let y = oy + h - (i + 1) as f64 * ch;
        let mut j = 0;
        while j < row.len() {
            let level = palette.level(row[j], panel.range);
            let mut run = 1;
            while j + run < row.len() && palette.level(row[j + run], panel.range) == level {
                run += 1;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(ox + j as f64 * cw),
                num(y),
                num(run as f64 * cw + 0.01),
                num(ch + 0.01),
                palette.color(level)
            );
            j += run;
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(ox),
        num(oy),
        num(w),
        num(h)
    );

    match &panel.x {
        AxisValues::Numeric(xs) if !xs.is_empty() => {
            text(out, ox, oy + h + 14.0, "start", &num(xs[0]));
            text(out, ox + w, oy + h + 14.0, "end", &num(xs[xs.len() - 1]));
        }
        AxisValues::Labels(ls) => {
            for (j, l) in ls.iter().enumerate() {
                text(out, ox + (j as f64 + 0.5) * cw, oy + h + 14.0, "middle", l);
            }
        }
        _ => {}
    }
    match &panel.y {
        AxisValues::Numeric(ys) if !ys.is_empty() => {
            text(out, ox - 4.0, oy + h, "end", &num(ys[0]));
            text(out, ox - 4.0, oy + 10.0, "end", &num(ys[ys.len() - 1]));
        }
        AxisValues::Labels(ls) => {
            for (i, l) in ls.iter().enumerate() {
                text(out, ox - 4.0, oy + h - (i as f64 + 0.5) * ch + 4.0, "end", l);
            }
        }
        _ => {}
    }
    text(out, ox + w / 2.0, oy + h + 28.0, "middle", &panel.x_name);
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})">{}</text>"#,
        escape(&panel.y_name),
        x = num(ox - 30.0),
        y = num(oy + h / 2.0)
    );
}

/// Composite of panels laid out `columns` wide with a shared colorbar.
pub fn render_panels_svg(panels: &[HeatPanel], columns: usize, style: &SvgStyle) -> Result<String> {
    if panels.is_empty() || panels.iter().all(|p| p.values.is_empty()) {
        return Err(Error::EmptyData("no heatmap panels"));
    }
    for p in panels {
        let rows_ok = p.values.len() == p.y.len();
        let cols_ok = p.values.iter().all(|r| r.len() == p.x.len());
        if !rows_ok || !cols_ok {
            return Err(Error::InvalidInput(format!("panel `{}` values do not match its axes", p.title)));
        }
    }
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let m = style.margin;
    let cell_w = style.panel_width + 1.5 * m;
    let cell_h = style.panel_height + 1.5 * m;
    let width = columns as f64 * cell_w + m + 80.0;
    let height = rows as f64 * cell_h + m;
    let palette = Palette::new(style);

    let mut out = String::new();
    open_svg(&mut out, width, height, style);
    for (k, panel) in panels.iter().enumerate() {
        let ox = m + (k % columns) as f64 * cell_w;
        let oy = m + (k / columns) as f64 * cell_h;
        draw_panel(&mut out, panel, ox, oy, style, &palette);
    }

    // Colorbar keyed to the first panel's range.
    let range = panels[0].range;
    let bx = width - 60.0;
    let bh = style.panel_height;
    let steps = palette.levels;
    for s in 0..steps {
        let y = m + bh - (s + 1) as f64 * bh / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="16" height="{}" fill="{}"/>"#,
            num(bx),
            num(y),
            num(bh / steps as f64 + 0.01),
            palette.color(s)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="16" height="{}" fill="none" stroke="black"/>"#,
        num(bx),
        num(m),
        num(bh)
    );
    text(&mut out, bx + 20.0, m + bh, "start", &num(range.0));
    text(&mut out, bx + 20.0, m + bh / 2.0 + 4.0, "start", &num((range.0 + range.1) / 2.0));
    text(&mut out, bx + 20.0, m + 8.0, "start", &num(range.1));
    out.push_str("</svg>\n");
    Ok(out)
}

/// The ablation grid: one row per parameter group, low/default/high columns.
pub fn render_heatmap_svg(map: &Heatmap, style: &SvgStyle) -> Result<String> {
    let panels: Vec<HeatPanel> = map
        .rows
        .iter()
        .flat_map(|row| {
            row.panels.iter().map(|panel| HeatPanel {
                title: format!("{} ({})", row.group, panel.setting.label()),
                x_name: "v".into(),
                y_name: "P".into(),
                x: AxisValues::Numeric(map.v_axis.clone()),
                y: AxisValues::Numeric(map.p_axis.clone()),
                values: panel.values.clone(),
                range: (-1.0, 1.0),
            })
        })
        .collect();
    render_panels_svg(&panels, 3, style)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Linspace;
    use crate::sweeps::{run_heatmap, run_sweep, HeatmapSpec, SweepSpec};

    #[test]
    fn sweep_svg_has_one_polyline_per_level() {
        let rows = run_sweep(&SweepSpec::default()).unwrap();
        let svg = render_sweep_svg(&rows, &SvgStyle::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("P = 0.8"));
    }

    #[test]
    fn heatmap_svg_has_fifteen_panels() {
        let spec = HeatmapSpec {
            v_axis: Linspace::new(0.02, 1.0, 20),
            p_axis: Linspace::new(0.02, 0.98, 20),
            ..Default::default()
        };
        let svg = render_heatmap_svg(&run_heatmap(&spec).unwrap(), &SvgStyle::default()).unwrap();
        let titles = ["(low)", "(default)", "(high)"];
        let n: usize = titles.iter().map(|t| svg.matches(t).count()).sum();
        assert_eq!(n, 15);
        assert!(svg.contains("#ffffff"));
    }

    #[test]
    fn palette_is_white_at_zero() {
        let p = Palette::new(&SvgStyle::default());
        assert_eq!(p.color(p.level(0.0, (-1.0, 1.0))), "#ffffff");
        assert_eq!(p.color(p.level(-1.0, (-1.0, 1.0))), "#2166ac");
        assert_eq!(p.color(p.level(1.0, (-1.0, 1.0))), "#b2182b");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(render_sweep_svg(&[], &SvgStyle::default()), Err(Error::EmptyData(_))));
        assert!(render_panels_svg(&[], 3, &SvgStyle::default()).is_err());
    }
}
