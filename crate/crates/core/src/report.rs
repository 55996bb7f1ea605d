//! Plain-text tables and versioned JSON for every report type. Table
//! columns are separated by two spaces and never padded, so each row reads
//! the same as the corresponding row of the original result tables.

use num_rational::Ratio;
use serde::Serialize;

use crate::advisory::AdvisoryReport;
use crate::divergence::DivergenceReport;
use crate::integrity::TamperFinding;
use crate::package::{DependencyTree, TreeStats};
use crate::update::{ProbeFindings, UpdateOutcome};

pub const SCHEMA_VERSION: u32 = 1;

const SEP: &str = "  ";
const NONE: &str = "---";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    report: &'a T,
}

/// `{"schema_version": 1, "kind": ..., "report": ...}`, pretty printed.
pub fn json_envelope<T: Serialize>(kind: &str, report: &T) -> String {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        report,
    };
    let mut out = serde_json::to_string_pretty(&env).expect("reports serialize");
    out.push('\n');
    out
}

fn row(cells: &[String]) -> String {
    let mut line = cells.join(SEP);
    line.push('\n');
    line
}

/// Round half up to two decimals, from the exact value.
pub fn fixed2(r: &Ratio<u64>) -> String {
    let (n, d) = (u128::from(*r.numer()), u128::from(*r.denom()));
    let hundredths = (n * 200 + d) / (2 * d);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

pub fn render_advisory_table(reports: &[AdvisoryReport]) -> String {
    let mut out = row(&["Application".into(), "Total Advisories".into(), "Highest CVSS".into()]);
    for r in reports {
        let highest = r.highest_cvss.map_or_else(|| NONE.to_owned(), |c| format!("{c:.1}"));
        out += &row(&[r.application_name.clone(), r.total_advisories.to_string(), highest]);
    }
    out
}

/// One application's line in the divergence table.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRow {
    pub application: String,
    pub stats: TreeStats,
    pub report: DivergenceReport,
}

pub fn render_divergence_table(rows: &[DivergenceRow]) -> String {
    let mut out = row(&[
        "Application".into(),
        "Inc.".into(),
        "Deps.".into(),
        "Commits".into(),
        "Avg. comm.".into(),
    ]);
    for r in rows {
        let avg = r
            .report
            .average_commits_behind
            .as_ref()
            .map_or_else(|| NONE.to_owned(), fixed2);
        out += &row(&[
            r.application.clone(),
            r.stats.direct_includes.to_string(),
            r.stats.total_dependencies.to_string(),
            r.report.total_commits_behind.to_string(),
            avg,
        ]);
    }
    for r in rows {
        out += &format!(
            "note: {} average divides {} commits by {} of {} modules with a resolved tag\n",
            r.application,
            r.report.total_commits_behind,
            r.report.measured_modules,
            r.report.records.len()
        );
    }
    out
}

/// Per-module detail for the divergence scan.
pub fn render_divergence_records(report: &DivergenceReport) -> String {
    let mut out = row(&[
        "Module".into(),
        "Version".into(),
        "Tag".into(),
        "Behind".into(),
        "Status".into(),
    ]);
    for r in &report.records {
        let behind = r.commits_behind.map_or_else(|| NONE.to_owned(), |c| c.to_string());
        let status = if r.suspect {
            format!("{} suspect", r.status)
        } else {
            r.status.to_string()
        };
        out += &row(&[
            r.install_path.clone(),
            r.version.clone(),
            r.resolved_tag.clone().unwrap_or_else(|| NONE.to_owned()),
            behind,
            status,
        ]);
    }
    out
}

pub fn render_advisory_matches(report: &AdvisoryReport) -> String {
    let mut out = row(&[
        "Advisory".into(),
        "Module".into(),
        "Version".into(),
        "CVSS".into(),
        "Path".into(),
    ]);
    for m in &report.matches {
        out += &row(&[
            m.advisory_id.clone(),
            m.module_name.clone(),
            m.version.clone(),
            format!("{:.1}", m.cvss_score),
            m.via.join(" > "),
        ]);
    }
    out
}

pub fn render_tree(tree: &DependencyTree, stats: &TreeStats) -> String {
    let mut out = row(&["Module".into(), "Version".into(), "Class".into(), "Requested by".into()]);
    for m in &tree.modules {
        let class = if m.orphan {
            "orphan".to_owned()
        } else {
            format!("{:?}", m.class).to_lowercase()
        };
        let by: Vec<String> = m
            .requested_by
            .iter()
            .map(|r| {
                if r.parent.is_empty() {
                    format!("app@{}", r.range)
                } else {
                    format!("{}@{}", r.parent, r.range)
                }
            })
            .collect();
        out += &row(&[
            m.install_path.clone(),
            m.manifest.version_text.clone(),
            class,
            by.join(", "),
        ]);
    }
    let ratio = stats.ratio.as_ref().map_or_else(|| NONE.to_owned(), fixed2);
    out += &format!(
        "direct {}  total {}  ratio {}\n",
        stats.direct_includes, stats.total_dependencies, ratio
    );
    out
}

pub fn render_tamper_findings(findings: &[TamperFinding]) -> String {
    if findings.is_empty() {
        return "no findings\n".into();
    }
    let mut out = row(&["Kind".into(), "Path".into(), "Detail".into()]);
    for f in findings {
        let kind = serde_json::to_value(f.kind).expect("kind serializes");
        out += &row(&[
            kind.as_str().unwrap_or_default().to_owned(),
            f.path.clone(),
            f.detail.clone(),
        ]);
    }
    out
}

pub fn render_probe(p: &ProbeFindings) -> String {
    let mut out = format!("feed {}\n", p.feed_url);
    for f in &p.findings {
        let code = serde_json::to_value(f.code).expect("code serializes");
        out += &row(&[code.as_str().unwrap_or_default().to_owned(), f.detail.clone()]);
    }
    out
}

pub fn render_update_outcome(o: &UpdateOutcome) -> String {
    match o {
        UpdateOutcome::Applied {
            version,
            filename,
            package_sha256,
            install_path,
        } => format!(
            "applied {version} from {filename}\npackage sha256 {package_sha256}\ninstalled to {}\n",
            install_path.display()
        ),
        UpdateOutcome::NoUpdate => "no update\n".into(),
        UpdateOutcome::Refused { reason, detail } => {
            let reason = serde_json::to_value(reason).expect("reason serializes");
            format!("refused ({}): {detail}\n", reason.as_str().unwrap_or_default())
        }
    }
}
