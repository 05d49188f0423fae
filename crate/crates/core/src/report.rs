//! CSV and JSON renderings of experiment results.
//!
//! Lines and nodes appear under their external labels. Numbers use Rust's
//! shortest round-trip formatting, so rendering the same result twice gives
//! identical bytes.
//!
//! CSV layouts:
//!
//! | report          | columns                                               |
//! |-----------------|-------------------------------------------------------|
//! | gain sweep      | `k_c,n_c`                                             |
//! | multi sweep     | `from,to,k_c,n_c,outcome`                             |
//! | classification  | `from,to,label,static_n_c,dynamic_n_c,error`          |
//! | critical gains  | `from,to,critical_gain,lambda2,regime,error`          |
//! | cascade trips   | `from,to,mark,islanded`                               |
//! | trajectory      | `t,theta_<id>…,omega_<id>…,flow_<from>_<to>…`         |
//!
//! Every JSON document carries `"schema": "gridcascade-<kind>/1"`.

use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::dynamics::{CascadeReport, Trajectory};
use crate::grid::LineKey;
use crate::harness::{ClassificationTable, CriticalGainRow, GainCurve, LineLabel};
use crate::ingest::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format '{other}' (csv|json)")),
        }
    }
}

pub const SCHEMA_VERSION: u32 = 1;

fn schema(kind: &str) -> String {
    format!("gridcascade-{kind}/{SCHEMA_VERSION}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders a header and rows with the `csv` writer (RFC 4180 quoting).
fn render_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn gain_curve_csv(curve: &GainCurve) -> String {
    render_csv(
        &["k_c", "n_c"],
        curve.points.iter().map(|p| [p.gain.to_string(), p.n_c.to_string()]),
    )
}

pub fn gain_curves_csv(case: &GridCase, curves: &[GainCurve]) -> String {
    render_csv(
        &["from", "to", "k_c", "n_c", "outcome"],
        curves.iter().flat_map(|c| {
            let (a, b) = case.line_labels(c.fault);
            c.points.iter().map(move |p| {
                [
                    a.to_string(),
                    b.to_string(),
                    p.gain.to_string(),
                    p.n_c.to_string(),
                    p.outcome.as_str().to_string(),
                ]
            })
        }),
    )
}

#[derive(Serialize)]
struct CurveJson<'a> {
    fault: (u32, u32),
    mode: crate::dynamics::ControlMode,
    pinned: Vec<u32>,
    post_fault_connected: bool,
    zero_onset: Option<f64>,
    points: &'a [crate::harness::GainPoint],
}

#[derive(Serialize)]
struct CurvesDoc<'a> {
    schema: String,
    case: &'a str,
    curves: Vec<CurveJson<'a>>,
}

pub fn gain_curves_json(case: &GridCase, curves: &[GainCurve]) -> String {
    to_json(&CurvesDoc {
        schema: schema("sweep"),
        case: &case.name,
        curves: curves
            .iter()
            .map(|c| CurveJson {
                fault: case.line_labels(c.fault),
                mode: c.mode,
                pinned: c.pinned.iter().map(|&i| case.label(i)).collect(),
                post_fault_connected: c.post_fault_connected,
                zero_onset: c.zero_onset(),
                points: &c.points,
            })
            .collect(),
    })
}

pub fn classification_csv(case: &GridCase, table: &ClassificationTable) -> String {
    render_csv(
        &["from", "to", "label", "static_n_c", "dynamic_n_c", "error"],
        table.lines.iter().map(|c| {
            let (a, b) = case.line_labels(c.line);
            [
                a.to_string(),
                b.to_string(),
                c.label.map_or("", |l| l.as_str()).to_string(),
                opt(c.static_n_c),
                opt(c.dynamic_n_c),
                c.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct ClassRow {
    line: (u32, u32),
    label: Option<LineLabel>,
    static_n_c: Option<usize>,
    dynamic_n_c: Option<usize>,
    dynamic_outcome: Option<crate::dynamics::Outcome>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ClassDoc<'a> {
    schema: String,
    case: &'a str,
    safe: Vec<(u32, u32)>,
    static_failure: Vec<(u32, u32)>,
    dynamic_only: Vec<(u32, u32)>,
    errors: Vec<(u32, u32)>,
    lines: Vec<ClassRow>,
}

pub fn classification_json(case: &GridCase, table: &ClassificationTable) -> String {
    let labels = |keys: Vec<LineKey>| keys.into_iter().map(|k| case.line_labels(k)).collect();
    to_json(&ClassDoc {
        schema: schema("classification"),
        case: &case.name,
        safe: labels(table.with_label(LineLabel::Safe)),
        static_failure: labels(table.with_label(LineLabel::StaticFailure)),
        dynamic_only: labels(table.with_label(LineLabel::DynamicOnly)),
        errors: table.failures().iter().map(|c| case.line_labels(c.line)).collect(),
        lines: table
            .lines
            .iter()
            .map(|c| ClassRow {
                line: case.line_labels(c.line),
                label: c.label,
                static_n_c: c.static_n_c,
                dynamic_n_c: c.dynamic_n_c,
                dynamic_outcome: c.dynamic_outcome,
                error: c.error.clone(),
            })
            .collect(),
    })
}

pub fn critical_gain_csv(case: &GridCase, rows: &[CriticalGainRow]) -> String {
    render_csv(
        &["from", "to", "critical_gain", "lambda2", "regime", "error"],
        rows.iter().map(|r| {
            let (a, b) = case.line_labels(r.line);
            let (value, lambda2, regime) = match r.critical {
                Some(c) => (
                    c.value.to_string(),
                    c.lambda2.to_string(),
                    format!("{:?}", c.regime).to_lowercase(),
                ),
                None => Default::default(),
            };
            [a.to_string(), b.to_string(), value, lambda2, regime, r.error.clone().unwrap_or_default()]
        }),
    )
}

#[derive(Serialize)]
struct CriticalRowJson<'a> {
    line: (u32, u32),
    critical: Option<crate::spectral::CriticalGain>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct CriticalDoc<'a> {
    schema: String,
    case: &'a str,
    rows: Vec<CriticalRowJson<'a>>,
}

pub fn critical_gain_json(case: &GridCase, rows: &[CriticalGainRow]) -> String {
    to_json(&CriticalDoc {
        schema: schema("critical-gain"),
        case: &case.name,
        rows: rows
            .iter()
            .map(|r| CriticalRowJson {
                line: case.line_labels(r.line),
                critical: r.critical,
                error: r.error.as_deref(),
            })
            .collect(),
    })
}

pub fn cascade_csv(case: &GridCase, report: &CascadeReport) -> String {
    render_csv(
        &["from", "to", "mark", "islanded"],
        report.tripped.iter().map(|t| {
            let (a, b) = case.line_labels(t.line);
            [a.to_string(), b.to_string(), t.mark.value().to_string(), t.islanded.to_string()]
        }),
    )
}

#[derive(Serialize)]
struct TripJson {
    line: (u32, u32),
    mark: crate::dynamics::TripMark,
    islanded: bool,
}

#[derive(Serialize)]
struct CascadeDoc<'a> {
    schema: String,
    case: &'a str,
    initial_fault: (u32, u32),
    n_c: usize,
    outcome: crate::dynamics::Outcome,
    settle_time: Option<f64>,
    tripped: Vec<TripJson>,
    final_angles: &'a [f64],
}

pub fn cascade_json(case: &GridCase, report: &CascadeReport) -> String {
    to_json(&CascadeDoc {
        schema: schema("cascade"),
        case: &case.name,
        initial_fault: case.line_labels(report.initial_fault),
        n_c: report.n_c,
        outcome: report.outcome,
        settle_time: report.settle_time,
        tripped: report
            .tripped
            .iter()
            .map(|t| TripJson {
                line: case.line_labels(t.line),
                mark: t.mark,
                islanded: t.islanded,
            })
            .collect(),
        final_angles: report.final_state.angles(),
    })
}

pub fn trajectory_csv(case: &GridCase, trace: &Trajectory) -> String {
    let mut header = vec!["t".to_string()];
    for prefix in ["theta", "omega"] {
        header.extend(case.labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    header.extend(trace.lines.iter().map(|&k| {
        let (a, b) = case.line_labels(k);
        format!("flow_{a}_{b}")
    }));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    render_csv(
        &header,
        (0..trace.len()).map(|i| {
            std::iter::once(trace.time[i])
                .chain(trace.angles[i].iter().copied())
                .chain(trace.velocities[i].iter().copied())
                .chain(trace.flows[i].iter().copied())
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
        }),
    )
}

/// A result set that can be rendered as CSV or JSON.
#[derive(Debug, Clone, Copy)]
pub enum ReportData<'a> {
    Sweep(&'a [GainCurve]),
    Classification(&'a ClassificationTable),
    CriticalGains(&'a [CriticalGainRow]),
    Cascade(&'a CascadeReport),
}

/// A single sweep renders as the two-column `k_c,n_c` table; several sweeps
/// use the multi-sweep layout.
pub fn render(case: &GridCase, data: ReportData<'_>, format: ReportFormat) -> String {
    match (data, format) {
        (ReportData::Sweep([one]), ReportFormat::Csv) => gain_curve_csv(one),
        (ReportData::Sweep(c), ReportFormat::Csv) => gain_curves_csv(case, c),
        (ReportData::Sweep(c), ReportFormat::Json) => gain_curves_json(case, c),
        (ReportData::Classification(t), ReportFormat::Csv) => classification_csv(case, t),
        (ReportData::Classification(t), ReportFormat::Json) => classification_json(case, t),
        (ReportData::CriticalGains(r), ReportFormat::Csv) => critical_gain_csv(case, r),
        (ReportData::CriticalGains(r), ReportFormat::Json) => critical_gain_json(case, r),
        (ReportData::Cascade(r), ReportFormat::Csv) => cascade_csv(case, r),
        (ReportData::Cascade(r), ReportFormat::Json) => cascade_json(case, r),
    }
}

pub fn emit_report(
    case: &GridCase,
    data: ReportData<'_>,
    format: ReportFormat,
    path: &Path,
) -> io::Result<()> {
    write_report(path, &render(case, data, format))
}

/// Writes a rendered report, creating parent directories as needed.
pub fn write_report(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}
