//! Standalone SVG plots of result tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ResultTable, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    ScatterComplex,
    Scan,
    Heatmap,
    Profile,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scatter-complex" => Ok(PlotKind::ScatterComplex),
            "scan" => Ok(PlotKind::Scan),
            "heatmap" => Ok(PlotKind::Heatmap),
            "profile" => Ok(PlotKind::Profile),
            other => Err(Error::InvalidParameter(format!("unknown plot kind '{other}'"))),
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PBC_COLOR: &str = "#1f5fbf";
const FBC_COLOR: &str = "#d62728";
const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f"];

struct Canvas {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * (1.0 + lo.abs()) {
        return (lo - 1.0, hi + 1.0);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

impl Canvas {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y, body: String::new() }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn marker(&mut self, x: f64, y: f64, color: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, self.px(x), self.py(y));
    }

    fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, color: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y1), self.py(y0));
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            a.min(b),
            c.min(d),
            (b - a).abs(),
            (d - c).abs()
        );
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.2}" y="{y:.2}" font-size="12" text-anchor="{anchor}">{}</text>"#, escape(s));
    }

    fn finish(mut self, title: &str, xlabel: &str, ylabel: &str, legend: &[(String, String)]) -> String {
        let mut axes = String::new();
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(axes, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(axes, r#"<line x1="{xp:.2}" y1="{b}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#, b + 5.0);
            let _ = writeln!(axes, r#"<line x1="{:.2}" y1="{yp:.2}" x2="{l}" y2="{yp:.2}" stroke="black"/>"#, l - 5.0);
            self.text(xp, b + 18.0, &tick(xv), "middle");
            self.text(l - 8.0, yp + 4.0, &tick(yv), "end");
        }
        self.text(WIDTH / 2.0, HEIGHT - 16.0, xlabel, "middle");
        self.text(WIDTH / 2.0, 24.0, title, "middle");
        let _ = writeln!(
            self.body,
            r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(ylabel)
        );
        for (i, (label, color)) in legend.iter().enumerate() {
            let y = MARGIN + 14.0 + 16.0 * i as f64;
            let _ = writeln!(self.body, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, WIDTH - MARGIN + 6.0, y - 9.0);
            self.text(WIDTH - MARGIN + 20.0, y, label, "start");
        }
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{axes}{}</svg>\n",
            self.body
        )
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn col(table: &ResultTable, name: &str) -> Result<usize> {
    table.column_index(name).ok_or_else(|| Error::Schema(format!("plot needs column '{name}'")))
}

fn real_at(row: &[Value], i: usize) -> Option<f64> {
    match &row[i] {
        Value::Real(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

fn text_at(row: &[Value], i: usize) -> Option<&str> {
    match &row[i] {
        Value::Text(s) => Some(s),
        _ => None,
    }
}

fn axis_name(table: &ResultTable, key: &str, default: &str) -> String {
    table
        .metadata
        .get(key)
        .and_then(|a| a.get("name"))
        .and_then(|n| n.as_str())
        .unwrap_or(default)
        .to_owned()
}

fn axis_label(name: &str) -> String {
    match name {
        "theta1" => "θ₁/π".into(),
        "theta2" => "θ₂/π".into(),
        other => other.into(),
    }
}

/// Angles are plotted in units of π.
fn axis_scale(name: &str) -> f64 {
    if name.starts_with("theta") {
        PI
    } else {
        1.0
    }
}

fn scatter_complex(table: &ResultTable) -> Result<String> {
    let e = col(table, "E")?;
    let b = col(table, "boundary")?;
    let pts: Vec<(f64, f64, &str)> = table
        .rows
        .iter()
        .filter_map(|r| match (&r[e], text_at(r, b)) {
            (Value::Complex(z), Some(bd)) => Some((z.re, z.im, if bd == "pbc" { PBC_COLOR } else { FBC_COLOR })),
            _ => None,
        })
        .collect();
    let mut c = Canvas::new(padded_range(pts.iter().map(|p| p.0)), padded_range(pts.iter().map(|p| p.1)));
    for (x, y, color) in &pts {
        c.marker(*x, *y, color);
    }
    let legend = [("PBC".to_owned(), PBC_COLOR.to_owned()), ("FBC".to_owned(), FBC_COLOR.to_owned())];
    Ok(c.finish("Quasienergies", "Re E", "Im E", &legend))
}

fn scan(table: &ResultTable) -> Result<String> {
    let name = axis_name(table, "axis1", "theta2");
    let xi = col(table, &name)?;
    let e = col(table, "E")?;
    let b = table.column_index("boundary");
    let scale = axis_scale(&name);
    let pts: Vec<(f64, f64, &str)> = table
        .rows
        .iter()
        .filter_map(|r| {
            let x = real_at(r, xi)?;
            let Value::Complex(z) = &r[e] else { return None };
            let color = match b.and_then(|b| text_at(r, b)) {
                Some("pbc") => PBC_COLOR,
                _ => FBC_COLOR,
            };
            Some((x / scale, z.re, color))
        })
        .collect();
    let mut c = Canvas::new(padded_range(pts.iter().map(|p| p.0)), (-PI * 1.05, PI * 1.05));
    for (x, y, color) in &pts {
        c.marker(*x, *y, color);
    }
    Ok(c.finish("Quasienergy scan", &axis_label(&name), "Re E", &[]))
}

fn region_label(row: &[Value], table: &ResultTable) -> Option<String> {
    if let Some(i) = table.column_index("region") {
        return match real_at(row, i)? as i64 {
            1 => Some("①".into()),
            2 => Some("②".into()),
            3 => Some("③".into()),
            4 => Some("④".into()),
            _ => None,
        };
    }
    let a = real_at(row, table.column_index("nu0")?)?;
    let b = real_at(row, table.column_index("nupi")?)?;
    Some(format!("({a}, {b})"))
}

fn heatmap(table: &ResultTable) -> Result<String> {
    if table.column_index("region").is_none() && (table.column_index("nu0").is_none() || table.column_index("nupi").is_none()) {
        return Err(Error::Schema("heatmap needs a 'region' column or 'nu0' and 'nupi' columns".into()));
    }
    let xn = axis_name(table, "axis1", "theta1");
    let yn = axis_name(table, "axis2", "theta2");
    let (xi, yi) = (col(table, &xn)?, col(table, &yn)?);
    let (xs, ys) = (axis_scale(&xn), axis_scale(&yn));
    let cells: Vec<(f64, f64, String)> = table
        .rows
        .iter()
        .filter_map(|r| {
            let label = region_label(r, table).unwrap_or_else(|| "n/a".into());
            Some((real_at(r, xi)? / xs, real_at(r, yi)? / ys, label))
        })
        .collect();
    let distinct = |v: Vec<f64>| {
        let mut v = v;
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let ux = distinct(cells.iter().map(|c| c.0).collect());
    let uy = distinct(cells.iter().map(|c| c.1).collect());
    let half = |u: &[f64]| if u.len() > 1 { 0.5 * (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64 } else { 0.5 };
    let (hx, hy) = (half(&ux), half(&uy));
    let mut colors: BTreeMap<String, String> = BTreeMap::new();
    for (_, _, label) in &cells {
        let n = colors.len();
        let color = if label == "n/a" { "#cccccc".to_owned() } else { PALETTE[n % PALETTE.len()].to_owned() };
        colors.entry(label.clone()).or_insert(color);
    }
    let range = |u: &[f64], h: f64| if u.is_empty() { (-1.0, 1.0) } else { (u[0] - h, u[u.len() - 1] + h) };
    let mut c = Canvas::new(range(&ux, hx), range(&uy, hy));
    for (x, y, label) in &cells {
        c.rect(x - hx, x + hx, y - hy, y + hy, &colors[label]);
    }
    let legend: Vec<(String, String)> = colors.into_iter().collect();
    Ok(c.finish("Phase map", &axis_label(&xn), &axis_label(&yn), &legend))
}

fn profile(table: &ResultTable) -> Result<String> {
    let si = col(table, "site")?;
    let ai = col(table, "amplitude")?;
    let alpha = table.column_index("alpha");
    let eta = table.column_index("eta");
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &table.rows {
        let (Some(s), Some(a)) = (real_at(r, si), real_at(r, ai)) else { continue };
        if a == 0.0 {
            continue;
        }
        let key = format!(
            "α={} η={}",
            alpha.and_then(|i| text_at(r, i)).unwrap_or("-"),
            eta.and_then(|i| real_at(r, i)).map_or("-".into(), |e| format!("{e:+}"))
        );
        series.entry(key).or_default().push((s, a.abs().log10()));
    }
    let all = || series.values().flatten();
    let mut c = Canvas::new(padded_range(all().map(|p| p.0)), padded_range(all().map(|p| p.1)));
    let mut legend = Vec::new();
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (x, y) in pts {
            c.marker(*x, *y, color);
        }
        legend.push((name.clone(), color.to_owned()));
    }
    Ok(c.finish("Edge-mode profile", "site n", "log10 |a_n|", &legend))
}

pub fn render_svg(table: &ResultTable, kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::ScatterComplex => scatter_complex(table),
        PlotKind::Scan => scan(table),
        PlotKind::Heatmap => heatmap(table),
        PlotKind::Profile => profile(table),
    }
}

pub fn emit_plot(table: &ResultTable, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_svg(table, kind)?;
    std::fs::write(path, svg).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
