//! Output files. Every artifact records the tool and library versions, the
//! command and the SHA-256 of the canonical configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format, OutputConfig};
use crate::CliError;

/// Environment variable that, when set, roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "CARLEMAN_LAB_OUTPUT_ROOT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the canonical JSON form, so formatting and key order in the TOML
/// file do not matter.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("config serializes").as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub config_hash: String,
}

impl Meta {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            tool: "carleman-lab",
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: carleman_lab::VERSION,
            command: command.to_string(),
            config_hash: config_hash(cfg),
        }
    }

    fn line(&self) -> String {
        format!(
            "{} {} (library {}) command={} config_sha256={}",
            self.tool, self.tool_version, self.library_version, self.command, self.config_hash
        )
    }
}

pub struct Artifacts {
    pub dir: PathBuf,
    pub meta: Meta,
    output: OutputConfig,
}

impl Artifacts {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let base = Path::new(&cfg.output.directory);
        let dir = match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if base.is_relative() => PathBuf::from(root).join(base),
            _ => base.to_path_buf(),
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            meta: Meta::new(command, cfg),
            output: cfg.output.clone(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    /// CSV with a leading `#` metadata line.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        if !self.output.wants(Format::Csv) {
            return Ok(());
        }
        let mut body = format!("# {}\n{}\n", self.meta.line(), header.join(","));
        for row in rows {
            body.push_str(&row.join(","));
            body.push('\n');
        }
        self.write(name, &body)
    }

    /// Pre-formatted CSV text; the metadata line is prepended.
    pub fn csv_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        if !self.output.wants(Format::Csv) {
            return Ok(());
        }
        self.write(name, &format!("# {}\n{text}", self.meta.line()))
    }

    /// JSON object with a `meta` member added; returns the document.
    pub fn json(&mut self, name: &str, payload: Value) -> Result<Value, CliError> {
        let mut doc = json!({ "meta": self.meta });
        if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
            d.extend(p);
        }
        if self.output.wants(Format::Json) {
            let text = serde_json::to_string_pretty(&doc).expect("json serializes") + "\n";
            self.write(name, &text)?;
        }
        Ok(doc)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<(), CliError> {
        if !self.output.wants(Format::Svg) {
            return Ok(());
        }
        let body = plot.render(&self.meta.line());
        self.write(name, &body)
    }
}

/// One series of a plot: markers, or a polyline when `line` is set.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

/// A minimal self-contained SVG chart with optional log axes.
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn transform(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { x.log10() } else { x };
        let y = if self.log_y { y.log10() } else { y };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    pub fn render(&self, meta: &str) -> String {
        let (w, h, m) = (640.0, 420.0, 60.0);
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().filter_map(|&p| self.transform(p))).collect();
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            match (lo.is_finite(), hi > lo) {
                (true, true) => (lo, hi),
                (true, false) => (lo - 0.5, lo + 0.5),
                _ => (0.0, 1.0),
            }
        };
        let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
        let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };

        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(out, "<!-- {} -->", escape(meta));
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<path d="M{m} {} H{} M{m} {} V{m}" stroke="black" fill="none"/>"#,
            h - m,
            w - m,
            h - m
        );
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            w / 2.0,
            h - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        );
        for (v, log, horizontal) in [(x0, self.log_x, true), (x1, self.log_x, true), (y0, self.log_y, false), (y1, self.log_y, false)] {
            let label = tick(v, log);
            if horizontal {
                let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{label}</text>"#, sx(v), h - m + 14.0);
            } else {
                let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{label}</text>"#, m - 4.0, sy(v) + 3.0);
            }
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|&p| self.transform(p)).collect();
            if s.line {
                let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(out, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
            } else {
                for &(x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
                }
            }
            let ly = m + 16.0 * i as f64;
            let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, w - m - 150.0, ly - 9.0);
            let _ = writeln!(out, r#"<text x="{}" y="{ly}" font-size="11">{}</text>"#, w - m - 135.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn plot_is_self_contained_and_skips_nonpositive_log_values() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "pts".into(),
                points: vec![(1.0, 1.0), (10.0, 100.0), (0.0, 5.0)],
                line: false,
            }],
        };
        let svg = plot.render("meta");
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("href"));
    }
}
