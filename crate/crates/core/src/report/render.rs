use std::fmt::Write as _;

use serde::Serialize;

use super::{format_precision, summarize_precision, InconsistencyReport, PrecisionMetrics, UniqueBugGroup};
use crate::agent::{AuditRun, PropertyStatus, RunUsage};
use crate::llm::UsageStats;

pub const REPORT_FORMAT: &str = "rfc-audit-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format {other:?} (expected json or markdown)")),
        }
    }
}

#[derive(Serialize)]
struct Summary {
    properties: usize,
    conformant: usize,
    violation: usize,
    inconclusive: usize,
    failed: usize,
    reports: usize,
    groups: usize,
    unvalidated: usize,
    tool_executions: usize,
}

#[derive(Serialize)]
struct GroupDoc<'a> {
    #[serde(flatten)]
    group: &'a UniqueBugGroup,
    reports: Vec<&'a InconsistencyReport>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    format: &'static str,
    version: u32,
    rfc_id: &'a str,
    repository: &'a str,
    summary: Summary,
    precision: PrecisionMetrics,
    groups: Vec<GroupDoc<'a>>,
    usage: &'a RunUsage,
    warnings: &'a [String],
}

fn summary(run: &AuditRun, groups: &[UniqueBugGroup]) -> Summary {
    Summary {
        properties: run.properties.len(),
        conformant: run.count(PropertyStatus::Conformant),
        violation: run.count(PropertyStatus::Violation),
        inconclusive: run.count(PropertyStatus::Inconclusive),
        failed: run.count(PropertyStatus::Failed),
        reports: run.reports.len(),
        groups: groups.len(),
        unvalidated: run.unvalidated(),
        tool_executions: run.tool_executions(),
    }
}

fn members<'a>(run: &'a AuditRun, group: &UniqueBugGroup) -> Vec<&'a InconsistencyReport> {
    group
        .members
        .iter()
        .filter_map(|m| run.reports.iter().find(|r| &r.report_id == m))
        .collect()
}

pub fn render_json(run: &AuditRun, groups: &[UniqueBugGroup]) -> String {
    let doc = ReportDoc {
        format: REPORT_FORMAT,
        version: REPORT_VERSION,
        rfc_id: &run.rfc_id,
        repository: &run.repository,
        summary: summary(run, groups),
        precision: summarize_precision(&run.reports, groups),
        groups: groups
            .iter()
            .map(|g| GroupDoc {
                group: g,
                reports: members(run, g),
            })
            .collect(),
        usage: &run.usage,
        warnings: &run.warnings,
    };
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

fn usage_row(out: &mut String, phase: &str, u: &UsageStats) {
    let _ = writeln!(
        out,
        "| {phase} | {}K | {}K | {} | ${:.2} | {:.1} min |",
        (u.input_tokens as f64 / 1000.0).round() as u64,
        (u.output_tokens as f64 / 1000.0).round() as u64,
        u.call_count,
        u.cost_usd,
        u.wall_time_ms as f64 / 60_000.0
    );
}

fn quote(text: &str) -> String {
    text.lines().map(|l| format!("> {l}")).collect::<Vec<_>>().join("\n")
}

pub fn render_markdown(run: &AuditRun, groups: &[UniqueBugGroup]) -> String {
    let s = summary(run, groups);
    let metrics = summarize_precision(&run.reports, groups);
    let mut out = String::new();
    let _ = writeln!(out, "# {} audit of {}\n", run.rfc_id, run.repository);
    let _ = writeln!(
        out,
        "{} properties checked: {} conformant, {} violation, {} inconclusive, {} failed.\n",
        s.properties, s.conformant, s.violation, s.inconclusive, s.failed
    );
    if run.reports.is_empty() {
        let _ = writeln!(out, "No inconsistencies were reported (zero findings).\n");
    } else {
        let _ = writeln!(
            out,
            "{} reports in {} unique groups; {} not reviewed by the validator. Precision: {} ({} confirmed, {} rejected, {} unreviewed).\n",
            s.reports,
            s.groups,
            s.unvalidated,
            format_precision(metrics.precision),
            metrics.confirmed,
            metrics.rejected,
            metrics.unreviewed
        );
    }
    for g in groups {
        let reports = members(run, g);
        let _ = writeln!(
            out,
            "## {} ({} report{})\n",
            g.group_id,
            reports.len(),
            if reports.len() == 1 { "" } else { "s" }
        );
        for r in reports {
            let _ = writeln!(
                out,
                "### {} on {} (section {})\n",
                r.report_id, r.property_id, r.rfc_section
            );
            let _ = writeln!(out, "{}\n", quote(&r.excerpt));
            let _ = writeln!(out, "{}\n", r.explanation);
            for i in &r.implicated {
                let _ = writeln!(
                    out,
                    "`{}` in `{}` lines {}-{} (bytes {}..{}):\n\n```c\n{}\n```\n",
                    i.function, i.path, i.lines.0, i.lines.1, i.span.start, i.span.end, i.snippet
                );
            }
            let review = if r.validated {
                "confirmed by review"
            } else {
                "not reviewed"
            };
            let _ = writeln!(out, "Validation: {review}. {}\n", r.confidence_note);
            let _ = writeln!(
                out,
                "Triage: {}, novelty {}. Transcript: `{}`\n",
                r.status.as_str(),
                r.novelty.as_str(),
                r.transcript
            );
        }
    }
    if !run.warnings.is_empty() {
        let _ = writeln!(out, "## Warnings\n");
        for w in &run.warnings {
            let _ = writeln!(out, "- {w}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "## Usage\n");
    let _ = writeln!(out, "| Phase | In | Out | Calls | Cost | Time |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    if let Some(u) = &run.usage.indexing {
        usage_row(&mut out, "Indexing", u);
    }
    if let Some(u) = &run.usage.extraction {
        usage_row(&mut out, "Properties", u);
    }
    usage_row(&mut out, "Detection", &run.usage.detection);
    usage_row(&mut out, "Total", &run.usage.total);
    out
}

pub fn render(run: &AuditRun, groups: &[UniqueBugGroup], format: Format) -> String {
    match format {
        Format::Json => render_json(run, groups),
        Format::Markdown => render_markdown(run, groups),
    }
}
