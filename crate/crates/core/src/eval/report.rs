use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::docs::ProviderKind;
use crate::orchestrator::AgentConfig;
use crate::rewards::RewardConfig;

/// Per-question outcome. Metric values are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub answer: Option<String>,
    pub f1: f64,
    pub cem: f64,
    pub em: f64,
    pub r_overall: f64,
    pub t: usize,
    pub termination: String,
}

/// Means over the question rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub f1: f64,
    pub cem: f64,
    pub em: f64,
    pub r_overall: f64,
    pub mean_t: f64,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

impl Aggregate {
    pub fn from_rows(rows: &[ReportRow]) -> Self {
        let col = |f: fn(&ReportRow) -> f64| mean(rows.iter().map(f).collect());
        Self {
            count: rows.len(),
            f1: col(|r| r.f1),
            cem: col(|r| r.cem),
            em: col(|r| r.em),
            r_overall: col(|r| r.r_overall),
            mean_t: col(|r| r.t as f64),
        }
    }
}

/// An input that could not be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportError {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

/// Run settings recorded in the report. Wall-clock data lives in a separate
/// metadata file so reports of identical runs compare equal byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentConfig>,
    pub reward: RewardConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    /// False when some rollout lost its model or inputs failed to score.
    pub complete: bool,
    pub aggregate: Aggregate,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub errors: Vec<ReportError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RunInfo>,
}

impl EvalReport {
    pub fn new(dataset: impl Into<String>, rows: Vec<ReportRow>, errors: Vec<ReportError>, meta: Option<RunInfo>) -> Self {
        let complete = errors.is_empty() && rows.iter().all(|r| r.termination != "llm_error");
        Self {
            dataset: dataset.into(),
            complete,
            aggregate: Aggregate::from_rows(&rows),
            rows,
            errors,
            meta,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(EvalError::Report(format!("unknown format \"{other}\""))),
        }
    }
}

/// Percent with one decimal.
pub fn percent(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

pub fn report_render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Table => render_table(report),
    }
}

fn render_table(report: &EvalReport) -> String {
    let header = ["id", "t", "termination", "F1", "CEM", "EM", "answer"];
    let mut lines: Vec<[String; 7]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.id.clone(),
                r.t.to_string(),
                r.termination.clone(),
                percent(r.f1),
                percent(r.cem),
                percent(r.em),
                r.answer.clone().unwrap_or_default().replace('\n', " "),
            ]
        })
        .collect();
    if !report.rows.is_empty() {
        let a = &report.aggregate;
        lines.push([
            format!("{} (n={})", report.dataset, a.count),
            format!("{:.1}", a.mean_t),
            if report.complete { String::new() } else { "incomplete".into() },
            percent(a.f1),
            percent(a.cem),
            percent(a.em),
            String::new(),
        ]);
    }
    let mut width = header.map(str::len);
    for l in &lines {
        for (w, cell) in width.iter_mut().zip(l) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt = |cells: &[String]| {
        let mut s = cells
            .iter()
            .zip(width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let rule = fmt(&width.map(|w| "-".repeat(w)));
    let mut out = fmt(&header.map(String::from));
    out.push_str(&rule);
    let n = report.rows.len();
    for (i, l) in lines.iter().enumerate() {
        if i == n {
            out.push_str(&rule);
        }
        out.push_str(&fmt(l));
    }
    out
}

const CSV_HEADER: [&str; 9] = ["kind", "id", "answer", "f1", "cem", "em", "r_overall", "t", "termination"];

/// One `mean` line carrying the aggregate, then one `question` line per row.
fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let a = &report.aggregate;
    let mut put = |rec: [String; 9]| w.write_record(&rec).expect("in-memory write");
    put(CSV_HEADER.map(String::from));
    put([
        "mean".into(),
        report.dataset.clone(),
        String::new(),
        a.f1.to_string(),
        a.cem.to_string(),
        a.em.to_string(),
        a.r_overall.to_string(),
        a.mean_t.to_string(),
        if report.complete { "complete" } else { "incomplete" }.into(),
    ]);
    for r in &report.rows {
        put([
            "question".into(),
            r.id.clone(),
            r.answer.clone().unwrap_or_default(),
            r.f1.to_string(),
            r.cem.to_string(),
            r.em.to_string(),
            r.r_overall.to_string(),
            r.t.to_string(),
            r.termination.clone(),
        ]);
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Reads the CSV rendering back. Error lists and run settings are not part
/// of the CSV form and come back empty.
pub fn parse_report_csv(text: &str) -> Result<EvalReport, EvalError> {
    let bad = |m: String| EvalError::Report(m);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected CSV header {headers:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    let mut mean_line = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        match &rec[0] {
            "mean" => mean_line = Some(rec),
            "question" => rows.push(ReportRow {
                id: rec[1].to_owned(),
                answer: Some(rec[2].to_owned()).filter(|a| !a.is_empty()),
                f1: num(&rec[3])?,
                cem: num(&rec[4])?,
                em: num(&rec[5])?,
                r_overall: num(&rec[6])?,
                t: rec[7].parse().map_err(|e| bad(format!("bad t {:?}: {e}", &rec[7])))?,
                termination: rec[8].to_owned(),
            }),
            other => return Err(bad(format!("unknown row kind {other:?}"))),
        }
    }
    let m = mean_line.ok_or_else(|| bad("missing mean row".into()))?;
    Ok(EvalReport {
        dataset: m[1].to_owned(),
        complete: &m[8] == "complete",
        aggregate: Aggregate {
            count: rows.len(),
            f1: num(&m[3])?,
            cem: num(&m[4])?,
            em: num(&m[5])?,
            r_overall: num(&m[6])?,
            mean_t: num(&m[7])?,
        },
        rows,
        errors: Vec::new(),
        meta: None,
    })
}
