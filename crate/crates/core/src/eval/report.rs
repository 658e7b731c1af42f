use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, RunReport, TrialRow};
use crate::agent::transcript_to_jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    MarkdownTable,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::MarkdownTable];
}

/// One stacked latency bar, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub variant: String,
    pub input: usize,
    pub trial: u32,
    pub retrieval_ms: f64,
    pub generation_ms: f64,
    pub verification_ms: f64,
    pub repair_ms: f64,
    pub repair_iterations: usize,
    pub user_wait_ms: f64,
    pub deployment_ms: f64,
    pub total_ms: f64,
}

pub fn latency_rows(report: &RunReport) -> Vec<LatencyRow> {
    report
        .rows()
        .map(|r| {
            let l = &r.latency;
            LatencyRow {
                variant: r.variant.name().to_string(),
                input: r.input,
                trial: r.trial,
                retrieval_ms: l.retrieval_ms,
                generation_ms: l.generation_ms,
                verification_ms: l.verification_ms,
                repair_ms: l.repair_total_ms(),
                repair_iterations: l.repair_ms.len(),
                user_wait_ms: l.user_wait_ms,
                deployment_ms: l.deployment_ms,
                total_ms: l.total_ms,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct FlatRow<'a> {
    variant: &'a str,
    input: usize,
    trial: u32,
    syntax_pass_initial: bool,
    syntax_pass: bool,
    deployable: bool,
    iterations: u32,
    verifier_calls: u32,
    total_ms: f64,
    judged_correct: Option<bool>,
    failure: &'a str,
    request: &'a str,
}

impl<'a> From<&'a TrialRow> for FlatRow<'a> {
    fn from(r: &'a TrialRow) -> Self {
        Self {
            variant: r.variant.name(),
            input: r.input,
            trial: r.trial,
            syntax_pass_initial: r.syntax_pass_initial,
            syntax_pass: r.syntax_pass,
            deployable: r.deployable,
            iterations: r.iterations,
            verifier_calls: r.verifier_calls,
            total_ms: r.latency.total_ms,
            judged_correct: r.judged_correct,
            failure: r.failure.as_deref().unwrap_or(""),
            request: &r.request,
        }
    }
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    series: &'a str,
    iterations: String,
    count: usize,
}

fn histogram_rows<'a>(series: &'a str, bins: &[usize], unresolved: usize) -> Vec<HistogramRow<'a>> {
    let mut out: Vec<HistogramRow> = bins
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            series,
            iterations: i.to_string(),
            count,
        })
        .collect();
    out.push(HistogramRow {
        series,
        iterations: "unresolved".into(),
        count: unresolved,
    });
    out
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.2}")
}

/// The variant table, one row per variant in run order.
pub fn markdown_table(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str("| Configuration | Trials | Syntax pass, first output (%) | Syntax pass, final (%) | Deployable (%) | Judged accuracy (%) | Needed repair (%) | Mean latency (s) |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for v in &report.variants {
        let a = &v.aggregates;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {:.2} |",
            v.label,
            a.trials,
            fmt_pct(a.syntax_pass_initial),
            fmt_pct(a.syntax_pass),
            fmt_pct(a.deployable),
            a.judged_accuracy.map_or("n/a".to_string(), fmt_pct),
            fmt_pct(a.needs_repair),
            a.mean_latency.total_ms / 1000.0,
        );
    }
    if let Some(n) = &report.nile {
        let _ = write!(
            s,
            "\n| Nile intents | Precision | Recall | F1 | Exact match (%) | Fuzzy match (%) | Unparsed |\n|---:|---:|---:|---:|---:|---:|---:|\n| {} | {:.4} | {:.4} | {:.4} | {} | {} | {} |\n",
            n.count,
            n.precision,
            n.recall,
            n.f1,
            fmt_pct(n.exact_match),
            fmt_pct(n.fuzzy_match),
            n.unparsed,
        );
    }
    s
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<(), EvalError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| EvalError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(&path, contents).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    written.push(path);
    Ok(())
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))
}

/// Writes the report in each format under `dir`, plus one transcript per
/// trial that still carries its turns. Returns the files written.
pub fn emit_report(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EvalError> {
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Json => {
                let text = serde_json::to_string_pretty(report).expect("report serializes");
                write(dir.join("report.json"), text + "\n", &mut written)?;
            }
            Format::Csv => {
                write(dir.join("trials.csv"), to_csv(report.rows().map(FlatRow::from))?, &mut written)?;
                write(dir.join("latency.csv"), to_csv(latency_rows(report))?, &mut written)?;
                let hist = report
                    .variants
                    .iter()
                    .flat_map(|v| histogram_rows(v.variant.name(), &v.aggregates.iteration_histogram, v.aggregates.undeployed));
                write(dir.join("histogram.csv"), to_csv(hist)?, &mut written)?;
                if let Some(n) = &report.nile {
                    write(dir.join("nile_rows.csv"), to_csv(&n.rows)?, &mut written)?;
                    let hist = histogram_rows("nile", &n.iteration_histogram, n.unparsed);
                    write(dir.join("nile_histogram.csv"), to_csv(hist)?, &mut written)?;
                }
            }
            Format::MarkdownTable => write(dir.join("table.md"), markdown_table(report), &mut written)?,
        }
    }
    for r in report.rows().filter(|r| !r.transcript.is_empty()) {
        let path = dir
            .join("transcripts")
            .join(r.variant.name())
            .join(format!("input-{:02}-trial-{}.jsonl", r.input, r.trial));
        write(path, transcript_to_jsonl(&r.transcript), &mut written)?;
    }
    Ok(written)
}
