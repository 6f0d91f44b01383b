//! Result rows and their deterministic CSV / JSON / SVG emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// One measured quantity with its acceptance decision.
/// JSON value of an exponent, with `inf` spelled out (`json!` would give `null`).
pub fn exponent(p: f64) -> Value {
    if p == f64::INFINITY {
        Value::from("inf")
    } else {
        Value::from(p)
    }
}

pub fn exponents(ps: &[f64]) -> Value {
    Value::Array(ps.iter().map(|&p| exponent(p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub suite: String,
    pub params: Value,
    pub value: f64,
    pub target: Option<f64>,
    pub tol: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Row {
    /// A row that records `value` and passes iff it is finite.
    pub fn finite(suite: &str, params: Value, value: f64) -> Self {
        Self { suite: suite.into(), params, value, target: None, tol: None, pass: value.is_finite(), note: None }
    }

    /// Passes iff `|value - target| <= tol`.
    pub fn close(suite: &str, params: Value, value: f64, target: f64, tol: f64) -> Self {
        let pass = (value - target).abs() <= tol;
        Self { suite: suite.into(), params, value, target: Some(target), tol: Some(tol), pass, note: None }
    }

    /// Passes iff `value <= bound`; `tol` is left empty.
    pub fn at_most(suite: &str, params: Value, value: f64, bound: f64) -> Self {
        Self { suite: suite.into(), params, value, target: Some(bound), tol: None, pass: value <= bound, note: None }
    }

    /// Passes iff `value >= bound`.
    pub fn at_least(suite: &str, params: Value, value: f64, bound: f64) -> Self {
        Self { suite: suite.into(), params, value, target: Some(bound), tol: None, pass: value >= bound, note: None }
    }

    /// Passes iff `lo <= value <= hi`; stored as `target = (lo+hi)/2`,
    /// `tol = (hi-lo)/2`.
    pub fn within(suite: &str, params: Value, value: f64, lo: f64, hi: f64) -> Self {
        let (target, tol) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        Self {
            suite: suite.into(),
            params,
            value,
            target: Some(target),
            tol: Some(tol),
            pass: lo <= value && value <= hi,
            note: None,
        }
    }

    /// A failed row carrying an error message in place of a measurement.
    pub fn failed(suite: &str, params: Value, msg: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            params,
            value: f64::NAN,
            target: None,
            tol: None,
            pass: false,
            note: Some(msg.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn and(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

/// Data behind one log-log plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePlot {
    pub suite: String,
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub target_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config_hash: String,
    pub phi0_hash: String,
    pub grid: Option<GridMeta>,
    pub rows: Vec<Row>,
    pub plots: Vec<RatePlot>,
}

impl Report {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            phi0_hash: crate::partition::construction_hash(),
            grid: None,
            rows: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "param_json", "value", "target", "tol", "pass"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.suite.clone(),
                r.params.to_string(),
                fmt_num(r.value),
                r.target.map(fmt_num).unwrap_or_default(),
                r.tol.map(fmt_num).unwrap_or_default(),
                r.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.csv`, `report.json` and one `<suite>.svg` per suite
    /// with rate plots; returns the written paths.
    pub fn emit(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, self.to_csv())?;
        out.push(csv_path);
        let json_path = dir.join("report.json");
        fs::write(&json_path, self.to_json())?;
        out.push(json_path);
        let mut suites: Vec<&str> = self.plots.iter().map(|p| p.suite.as_str()).collect();
        suites.dedup();
        for suite in suites {
            let plots: Vec<&RatePlot> = self.plots.iter().filter(|p| p.suite == suite).collect();
            let path = dir.join(format!("{suite}.svg"));
            fs::write(&path, render_svg(suite, &plots))?;
            out.push(path);
        }
        Ok(out)
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log panel: markers for the data, solid fitted line, dashed guide with
/// the target slope through the data's first point.
pub fn render_svg(title: &str, plots: &[&RatePlot]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts = plots.iter().flat_map(|p| p.points.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |lx: f64| m + (lx - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |ly: f64| h - m - (ly - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(d as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#,
            h - m,
            h - m + 5.0,
            h - m + 18.0
        );
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(d as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{m}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            m - 5.0,
            m - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, w / 2.0, h - 15.0);

    for (i, p) in plots.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let valid: Vec<(f64, f64)> =
            p.points.iter().filter(|q| q.0 > 0.0 && q.1 > 0.0).map(|q| (q.0.log10(), q.1.log10())).collect();
        for &(lx, ly) in &valid {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#, sx(lx), sy(ly));
        }
        if let (Some(first), Some(last)) = (valid.first(), valid.last()) {
            // fitted line: log10 v = slope log10 t + intercept / ln 10
            let b = p.intercept / std::f64::consts::LN_10;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="1.5"/>"#,
                sx(first.0),
                sy(p.slope * first.0 + b),
                sx(last.0),
                sy(p.slope * last.0 + b)
            );
            if let Some(ts) = p.target_slope {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-dasharray="5,4" opacity="0.7"/>"#,
                    sx(first.0),
                    sy(first.1),
                    sx(last.0),
                    sy(first.1 + ts * (last.0 - first.0))
                );
            }
        }
        let target = p.target_slope.map(|t| format!(", target {t:.3}")).unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{}: slope {:.3}{}</text>"#,
            m + 8.0,
            m + 16.0 + 14.0 * i as f64,
            escape(&p.label),
            p.slope,
            target
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_report_is_headers_only() {
        let r = Report::new("abc");
        assert_eq!(r.to_csv(), "suite,param_json,value,target,tol,pass\n");
        assert!(r.all_pass());
    }

    #[test]
    fn rows_escape_json_params() {
        let mut r = Report::new("abc");
        r.rows.push(Row::close("x", json!({"a": 1, "b": [1, 2]}), 0.5, 0.5, 1e-3));
        let csv = r.to_csv();
        assert!(csv.contains(r#""{""a"":1,""b"":[1,2]}""#), "{csv}");
        assert!(csv.trim_end().ends_with("true"));
    }

    #[test]
    fn failed_row_is_nan() {
        let r = Row::failed("s", json!({}), "boom");
        assert!(!r.pass && r.value.is_nan());
    }

    #[test]
    fn svg_has_slope_in_legend() {
        let p = RatePlot {
            suite: "smoothing".into(),
            label: "case".into(),
            points: vec![(1e-3, 10.0), (1e-2, 3.0), (1e-1, 1.0)],
            slope: -0.5,
            intercept: 0.0,
            target_slope: Some(-0.5),
        };
        let svg = render_svg("smoothing", &[&p]);
        assert!(svg.starts_with("<svg") && svg.contains("slope -0.500"));
    }
}
