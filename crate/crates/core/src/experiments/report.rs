//! CSV tables, JSON summaries and SVG log-log plots for experiment reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::assertion::Assertion;
use super::audit::AuditReport;
use super::bridges::{BridgeMaxReport, RefinementReport, TailReport};
use super::integrals::IntegralReport;
use super::rate::{RateReport, ScalingReport};
use super::regression::{CoherenceReport, LimitLawReport, OlsReport};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// `<name>.csv` plus a `<name>.json` summary.
    Csv,
    /// `<name>.svg`, when the report has something to plot.
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv or svg)"))),
        }
    }
}

/// A finished report that can be written to disk.
pub trait Report {
    fn name(&self) -> &str;
    fn assertions(&self) -> &[Assertion];
    fn csv(&self) -> String;
    fn summary(&self) -> String;
    fn svg(&self) -> Option<String> {
        None
    }
}

/// Writes the report in `format` under `dir`; returns the files written.
pub fn emit_report(report: &dyn Report, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| Error::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = Vec::new();
    let mut write = |ext: &str, body: String| -> Result<()> {
        let path = dir.join(format!("{}.{ext}", report.name()));
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        files.push(path);
        Ok(())
    };
    match format {
        Format::Csv => {
            write("csv", report.csv())?;
            write("json", report.summary())?;
        }
        Format::Svg => {
            if let Some(svg) = report.svg() {
                write("svg", svg)?;
            }
        }
    }
    Ok(files)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// Line style of a plotted series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: Option<String>,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub style: Style,
}

/// A static log-log plot.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

impl LogLogPlot {
    /// `None` when no series has a positive finite point.
    pub fn render(&self) -> Option<String> {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts() {
            x0 = x0.min(x.log10());
            x1 = x1.max(x.log10());
            y0 = y0.min(y.log10());
            y1 = y1.max(y.log10());
        }
        if !x0.is_finite() {
            return None;
        }
        let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
        let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        for d in x0 as i32..=x1 as i32 {
            let x = LEFT + (d as f64 - x0) / (x1 - x0) * pw;
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, TOP + ph + 16.0);
        }
        for d in y0 as i32..=y1 as i32 {
            let y = TOP + (y1 - d as f64) / (y1 - y0) * ph;
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        let mut legend = 0;
        for series in &self.series {
            let p: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(x, y)| (sx(*x), sy(*y)))
                .collect();
            if p.is_empty() {
                continue;
            }
            match series.style {
                Style::Markers => {
                    for (x, y) in &p {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, series.color);
                    }
                }
                Style::Line | Style::Dashed => {
                    let coords: Vec<String> = p.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
                        coords.join(" "),
                        series.color
                    );
                }
            }
            if let Some(label) = &series.label {
                let y = TOP + 14.0 + 16.0 * legend as f64;
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" fill="{}">{}</text>"#,
                    LEFT + pw - 8.0,
                    series.color,
                    escape(label)
                );
                legend += 1;
            }
        }
        s.push_str("</svg>\n");
        Some(s)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Report for RateReport {
    fn name(&self) -> &str {
        &self.name
    }

    fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    /// `envelope` includes the margin; `pass` compares the configured error measure against it.
    fn csv(&self) -> String {
        let m = self.config.margin;
        let rows = self.replicates.iter().flat_map(|r| {
            r.checkpoints.iter().map(move |c| {
                let bound = m * c.finite_envelope.unwrap_or(c.envelope);
                format!("{},{},{},{},{}", c.t, r.replicate, c.measured(self.config.error), bound, self.checkpoint_passes(c))
            })
        });
        table("t,replicate,error,envelope,pass", rows)
    }

    fn summary(&self) -> String {
        json(self)
    }

    fn svg(&self) -> Option<String> {
        if self.replicates.is_empty() {
            return None;
        }
        let m = self.config.margin;
        let mut series: Vec<Series> = self
            .replicates
            .iter()
            .map(|r| Series {
                label: None,
                points: r.checkpoints.iter().map(|c| (c.t, c.measured(self.config.error))).collect(),
                color: "#7f7f7f",
                style: Style::Line,
            })
            .collect();
        let envelopes: Vec<Series> = self
            .replicates
            .iter()
            .map(|r| Series {
                label: None,
                points: r
                    .checkpoints
                    .iter()
                    .map(|c| (c.t, m * c.finite_envelope.unwrap_or(c.envelope)))
                    .collect(),
                color: "#d62728",
                style: Style::Dashed,
            })
            .collect();
        series[0].label = Some(format!("error ({} replicates)", self.replicates.len()));
        series.extend(envelopes);
        let first_envelope = self.replicates.len();
        series[first_envelope].label = Some(format!("{m} x envelope"));
        LogLogPlot {
            title: format!("{}: scheme {}, beta {}", self.name, self.config.scheme, self.config.beta),
            x_label: "t".into(),
            y_label: "error".into(),
            series,
        }
        .render()
    }
}

impl Report for ScalingReport {
    fn name(&self) -> &str {
        &self.name
    }

    fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    fn csv(&self) -> String {
        let rows = (0..self.periods.len())
            .map(|i| format!("{},{},{}", self.periods[i], self.epoch_prefactors[i], self.time_prefactors[i]));
        table("period,epoch_prefactor,time_prefactor", rows)
    }

    fn summary(&self) -> String {
        json(self)
    }

    fn svg(&self) -> Option<String> {
        let f = &self.epoch_fit;
        LogLogPlot {
            title: format!("{}: beta {}", self.name, self.config.beta),
            x_label: "T".into(),
            y_label: "prefactor".into(),
            series: vec![
                Series {
                    label: Some("epoch time".into()),
                    points: self.periods.iter().copied().zip(self.epoch_prefactors.iter().copied()).collect(),
                    color: "#1f77b4",
                    style: Style::Markers,
                },
                Series {
                    label: Some(format!("fit, slope {:.3}", f.slope)),
                    points: self.periods.iter().map(|t| (*t, (f.intercept + f.slope * t.ln()).exp())).collect(),
                    color: "#1f77b4",
                    style: Style::Dashed,
                },
                Series {
                    label: Some("physical time".into()),
                    points: self.periods.iter().copied().zip(self.time_prefactors.iter().copied()).collect(),
                    color: "#ff7f0e",
                    style: Style::Markers,
                },
            ],
        }
        .render()
    }
}

impl Report for CoherenceReport {
    fn name(&self) -> &str {
        &self.name
    }

    fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    fn csv(&self) -> String {
        let rows = self.replicates.iter().flat_map(|r| {
            (0..r.discrete_errors.len().min(r.continuous_errors.len()))
                .map(move |i| format!("{},{},{},{}", r.times[i], r.replicate, r.discrete_errors[i], r.continuous_errors[i]))
        });
        table("t,replicate,discrete_error,continuous_error", rows)
    }

    fn summary(&self) -> String {
        json(self)
    }

    fn svg(&self) -> Option<String> {
        if self.replicates.is_empty() {
            return None;
        }
        let mut series = Vec::new();
        for (i, r) in self.replicates.iter().enumerate() {
            let label = |s: &str| (i == 0).then(|| s.to_string());
            series.push(Series {
                label: label("SGDo"),
                points: r.times.iter().copied().zip(r.discrete_errors.iter().copied()).collect(),
                color: "#1f77b4",
                style: Style::Line,
            });
            series.push(Series {
                label: label("continuous"),
                points: r.times.iter().copied().zip(r.continuous_errors.iter().copied()).collect(),
                color: "#ff7f0e",
                style: Style::Dashed,
            });
        }
        LogLogPlot {
            title: format!("{}: scheme {}, beta {}", self.name, self.config.scheme, self.config.beta),
            x_label: "t = n h".into(),
            y_label: "error".into(),
            series,
        }
        .render()
    }
}

/// Reports without a plot, written under a caller-chosen name.
pub struct Named<'a, T> {
    pub name: String,
    pub report: &'a T,
}

macro_rules! plain_report {
    ($ty:ty, $header:expr, |$r:ident| $rows:expr) => {
        impl Report for Named<'_, $ty> {
            fn name(&self) -> &str {
                &self.name
            }

            fn assertions(&self) -> &[Assertion] {
                &self.report.assertions
            }

            fn csv(&self) -> String {
                let $r = self.report;
                table($header, $rows)
            }

            fn summary(&self) -> String {
                json(self.report)
            }
        }
    };
}

plain_report!(BridgeMaxReport, "replicate,final_max,envelope,violated", |r| r
    .final_maxima
    .iter()
    .enumerate()
    .map(|(i, m)| format!("{i},{m},{},{}", r.final_envelope, *m > r.final_envelope)));
plain_report!(TailReport, "offset,x,empirical,bound,standard_error,pass", |r| r
    .rows
    .iter()
    .map(|x| format!("{},{},{},{},{},{}", x.offset, x.x, x.empirical, x.bound, x.standard_error, x.passes)));
plain_report!(RefinementReport, "fine_steps,fine_median,coarse_median,ratio", |r| [format!(
    "{},{},{},{}",
    r.fine_steps, r.fine_median, r.coarse_median, r.ratio
)]);
plain_report!(IntegralReport, "check,t,value,bound,pass", |r| r
    .checks
    .iter()
    .map(|c| format!("\"{}\",{},{},{},{}", c.name, c.t, c.value, c.bound, c.passed)));
plain_report!(AuditReport, "quantity,recomputed,printed,flagged", |r| r.rows.iter().map(|x| format!(
    "\"{}\",{},{},{}",
    x.quantity,
    x.recomputed,
    x.printed.map(|p| p.to_string()).unwrap_or_default(),
    x.flagged
)));
plain_report!(LimitLawReport, "component,mean,target_mean,mean_z", |r| (0..r.limit.mean.len())
    .map(|i| format!("{i},{},{},{}", r.limit.mean[i], r.limit.target_mean[i], r.limit.mean_z[i])));
plain_report!(OlsReport, "datasets,relative_error,relative_error_exact,tolerance", |r| [format!(
    "{},{},{},{}",
    r.datasets, r.relative_error, r.relative_error_exact, r.tolerance
)]);
