//! Findings / impression extraction from free-text radiology reports.

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionHeaders {
    pub findings: Vec<String>,
    pub impression: Vec<String>,
    /// Headers that end a section without being extracted.
    pub other: Vec<String>,
}

impl Default for SectionHeaders {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        SectionHeaders {
            findings: v(&["findings"]),
            impression: v(&["impression", "impressions"]),
            other: v(&[
                "comparison",
                "clinical history",
                "history",
                "indication",
                "technique",
                "examination",
                "exam",
                "recommendation",
                "recommendations",
                "notification",
            ]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub findings: Option<String>,
    pub impression: Option<String>,
}

enum Kind {
    Findings,
    Impression,
    Other,
}

fn header_regex(headers: &SectionHeaders) -> Regex {
    let mut names: Vec<&String> = headers.findings.iter().chain(&headers.impression).chain(&headers.other).collect();
    // Longest first so "impressions" wins over "impression".
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let alternatives: Vec<String> = names.iter().map(|n| regex::escape(n).replace(' ', r"\s+")).collect();
    Regex::new(&format!(r"(?i)\b({})\s*:", alternatives.join("|"))).expect("header pattern compiles")
}

/// Case-insensitive `HEADER:` matching; a body runs to the next known header
/// or the end of the text. Missing or empty sections are `None`; if a header
/// repeats, the first occurrence is used.
pub fn extract_sections_with(report: &str, headers: &SectionHeaders) -> Sections {
    let re = header_regex(headers);
    let matches: Vec<(usize, usize, Kind)> = re
        .captures_iter(report)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let name = c[1].split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            let kind = if headers.findings.iter().any(|h| h.to_lowercase() == name) {
                Kind::Findings
            } else if headers.impression.iter().any(|h| h.to_lowercase() == name) {
                Kind::Impression
            } else {
                Kind::Other
            };
            (whole.start(), whole.end(), kind)
        })
        .collect();
    let mut out = Sections::default();
    for (i, (_, body_start, kind)) in matches.iter().enumerate() {
        let body_end = matches.get(i + 1).map_or(report.len(), |m| m.0);
        let body = report[*body_start..body_end].trim();
        let slot = match kind {
            Kind::Findings => &mut out.findings,
            Kind::Impression => &mut out.impression,
            Kind::Other => continue,
        };
        if slot.is_none() && !body.is_empty() {
            *slot = Some(body.to_string());
        }
    }
    out
}

pub fn extract_sections(report: &str) -> Sections {
    extract_sections_with(report, &SectionHeaders::default())
}
