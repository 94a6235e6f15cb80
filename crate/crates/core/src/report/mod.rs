//! Audit reports: grouping into unique bugs, triage bookkeeping and
//! rendering.

mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code::Span;
use crate::error::ReportError;

pub use render::{render, render_json, render_markdown, Format, REPORT_FORMAT, REPORT_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriageStatus {
    #[default]
    Unreviewed,
    ConfirmedTp,
    RejectedFp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Novelty {
    New,
    Old,
    #[default]
    Unknown,
}

impl TriageStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TriageStatus::Unreviewed => "unreviewed",
            TriageStatus::ConfirmedTp => "confirmed-tp",
            TriageStatus::RejectedFp => "rejected-fp",
        }
    }
}

impl Novelty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Novelty::New => "new",
            Novelty::Old => "old",
            Novelty::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplicatedLocation {
    pub entity_id: String,
    pub function: String,
    pub path: String,
    pub span: Span,
    /// 1-based inclusive line range.
    pub lines: (usize, usize),
    /// Source text at `span`.
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub report_id: String,
    pub property_id: String,
    pub rfc_section: String,
    pub statement: String,
    pub excerpt: String,
    pub explanation: String,
    pub implicated: Vec<ImplicatedLocation>,
    /// Transcript file, relative to the run directory.
    pub transcript: String,
    pub validated: bool,
    pub confidence_note: String,
    #[serde(default)]
    pub status: TriageStatus,
    #[serde(default)]
    pub novelty: Novelty,
}

impl InconsistencyReport {
    /// Entity ids of the implicated functions.
    pub fn function_set(&self) -> BTreeSet<&str> {
        self.implicated.iter().map(|i| i.entity_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueBugGroup {
    pub group_id: String,
    pub members: Vec<String>,
    /// Union of the members' implicated entity ids, sorted.
    pub locations: Vec<String>,
    pub novelty: Novelty,
}

/// Partitions reports into groups: two reports share a group iff they are
/// connected through overlapping implicated-function sets. Members are
/// sorted by report id and groups by their smallest member.
pub fn group_reports(reports: &[InconsistencyReport]) -> Vec<UniqueBugGroup> {
    let n = reports.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in reports.iter().enumerate() {
        for f in r.function_set() {
            match owner.get(f) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(f, i);
                }
            }
        }
    }
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        buckets.entry(root).or_default().push(i);
    }
    let mut groups: Vec<(String, Vec<usize>)> = buckets
        .into_values()
        .map(|mut members| {
            members.sort_by(|&a, &b| reports[a].report_id.cmp(&reports[b].report_id));
            (reports[members[0]].report_id.clone(), members)
        })
        .collect();
    groups.sort();
    groups
        .into_iter()
        .enumerate()
        .map(|(k, (_, members))| {
            let locations: BTreeSet<&str> = members.iter().flat_map(|&m| reports[m].function_set()).collect();
            let novelties: Vec<Novelty> = members.iter().map(|&m| reports[m].novelty).collect();
            let novelty = if novelties.contains(&Novelty::New) {
                Novelty::New
            } else if novelties.contains(&Novelty::Old) {
                Novelty::Old
            } else {
                Novelty::Unknown
            };
            UniqueBugGroup {
                group_id: format!("G{:03}", k + 1),
                members: members.iter().map(|&m| reports[m].report_id.clone()).collect(),
                locations: locations.into_iter().map(str::to_string).collect(),
                novelty,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageEntry {
    pub status: TriageStatus,
    #[serde(default)]
    pub novelty: Novelty,
}

/// Human labels keyed by report id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Triage {
    pub entries: BTreeMap<String, TriageEntry>,
}

impl Triage {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, ReportError> {
        serde_json::from_slice(bytes).map_err(|e| ReportError::Triage(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let bytes = std::fs::read(path).map_err(|e| ReportError::Triage(format!("{}: {e}", path.display())))?;
        Self::from_json_bytes(&bytes)
    }

    /// Copies labels onto the reports. Labels for unknown report ids are
    /// an error so typos do not silently drop a verdict.
    pub fn apply(&self, reports: &mut [InconsistencyReport]) -> Result<(), ReportError> {
        for id in self.entries.keys() {
            if !reports.iter().any(|r| &r.report_id == id) {
                return Err(ReportError::Triage(format!("unknown report id {id}")));
            }
        }
        for r in reports {
            if let Some(e) = self.entries.get(&r.report_id) {
                r.status = e.status;
                r.novelty = e.novelty;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionMetrics {
    pub reports: usize,
    pub confirmed: usize,
    pub rejected: usize,
    pub unreviewed: usize,
    /// `None` when nothing has been reviewed.
    pub precision: Option<f64>,
    /// Groups with at least one confirmed member.
    pub unique_bugs: usize,
    pub new_bugs: usize,
}

/// confirmed / (confirmed + rejected); unreviewed reports never count.
pub fn precision(confirmed: usize, rejected: usize) -> Option<f64> {
    let reviewed = confirmed + rejected;
    (reviewed > 0).then(|| confirmed as f64 / reviewed as f64)
}

pub fn summarize_precision(reports: &[InconsistencyReport], groups: &[UniqueBugGroup]) -> PrecisionMetrics {
    let count = |s: TriageStatus| reports.iter().filter(|r| r.status == s).count();
    let confirmed = count(TriageStatus::ConfirmedTp);
    let rejected = count(TriageStatus::RejectedFp);
    let confirmed_group = |g: &&UniqueBugGroup| {
        g.members.iter().any(|m| {
            reports
                .iter()
                .any(|r| &r.report_id == m && r.status == TriageStatus::ConfirmedTp)
        })
    };
    let bug_groups: Vec<&UniqueBugGroup> = groups.iter().filter(confirmed_group).collect();
    PrecisionMetrics {
        reports: reports.len(),
        confirmed,
        rejected,
        unreviewed: count(TriageStatus::Unreviewed),
        precision: precision(confirmed, rejected),
        unique_bugs: bug_groups.len(),
        new_bugs: bug_groups.iter().filter(|g| g.novelty == Novelty::New).count(),
    }
}

/// Percentage with one decimal, or "n/a".
pub fn format_precision(p: Option<f64>) -> String {
    match p {
        Some(p) => format!("{:.1}%", p * 100.0),
        None => "n/a".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn report(id: &str, functions: &[&str]) -> InconsistencyReport {
        InconsistencyReport {
            report_id: id.into(),
            property_id: "P".into(),
            rfc_section: "1".into(),
            statement: String::new(),
            excerpt: String::new(),
            explanation: String::new(),
            implicated: functions
                .iter()
                .map(|f| ImplicatedLocation {
                    entity_id: f.to_string(),
                    function: f.to_string(),
                    path: "a.c".into(),
                    span: Span::new(0, 1),
                    lines: (1, 1),
                    snippet: String::new(),
                })
                .collect(),
            transcript: String::new(),
            validated: true,
            confidence_note: String::new(),
            status: TriageStatus::Unreviewed,
            novelty: Novelty::Unknown,
        }
    }

    #[test]
    fn overlap_groups() {
        let rs = vec![
            report("R1", &["f1", "f2"]),
            report("R2", &["f4"]),
            report("R3", &["f2", "f3"]),
        ];
        let g = group_reports(&rs);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].members, vec!["R1", "R3"]);
        assert_eq!(g[0].locations, vec!["f1", "f2", "f3"]);
        assert_eq!(g[1].members, vec!["R2"]);
        assert_eq!(g[1].group_id, "G002");
        assert!(group_reports(&[]).is_empty());
    }

    #[test]
    fn precision_ignores_unreviewed() {
        assert_eq!(format_precision(precision(68, 83 - 68)), "81.9%");
        assert_eq!(precision(0, 0), None);
        let mut rs = vec![report("R1", &["a"]), report("R2", &["b"]), report("R3", &["c"])];
        let triage = Triage::from_json_bytes(
            br#"{"R1":{"status":"confirmed-tp","novelty":"new"},"R2":{"status":"rejected-fp"}}"#,
        )
        .unwrap();
        triage.apply(&mut rs).unwrap();
        let m = summarize_precision(&rs, &group_reports(&rs));
        assert_eq!((m.confirmed, m.rejected, m.unreviewed), (1, 1, 1));
        assert_eq!(m.precision, Some(0.5));
        assert_eq!((m.unique_bugs, m.new_bugs), (1, 1));
        let bad = Triage::from_json_bytes(br#"{"R9":{"status":"confirmed-tp"}}"#).unwrap();
        assert!(bad.apply(&mut rs).is_err());
    }
}
