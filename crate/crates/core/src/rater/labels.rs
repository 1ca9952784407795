//! Keyword flagging of reports and label-revision prompt emission.

use super::RaterError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingEntry {
    /// Noun phrase used in the prompt question, e.g. "a fracture".
    pub object: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FindingCatalog(pub BTreeMap<String, FindingEntry>);

impl FindingCatalog {
    /// The bundled catalog of chest X-ray findings.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../data/findings.json")).expect("bundled findings.json parses")
    }

    pub fn from_json(text: &str) -> Result<Self, RaterError> {
        serde_json::from_str(text).map_err(|e| RaterError::Invalid(format!("finding catalog: {e}")))
    }

    pub fn get(&self, finding: &str) -> Result<&FindingEntry, RaterError> {
        self.0.get(finding).ok_or_else(|| RaterError::UnknownFinding(finding.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub report_id: String,
    pub finding: String,
    /// Byte ranges of keyword hits in the original text.
    pub spans: Vec<(usize, usize)>,
}

/// One flag per (report, finding) with at least one case-insensitive keyword hit.
pub fn flag_reports(reports: &[(String, String)], catalog: &FindingCatalog) -> Vec<Flag> {
    let mut out = Vec::new();
    for (id, text) in reports {
        // ASCII lowercasing keeps byte offsets aligned with the original.
        let lower = text.to_ascii_lowercase();
        for (finding, entry) in &catalog.0 {
            let mut spans: Vec<(usize, usize)> = entry
                .keywords
                .iter()
                .flat_map(|k| {
                    let k = k.to_ascii_lowercase();
                    lower.match_indices(&k).map(|(s, m)| (s, s + m.len())).collect::<Vec<_>>()
                })
                .collect();
            if spans.is_empty() {
                continue;
            }
            spans.sort_unstable();
            spans.dedup();
            out.push(Flag {
                report_id: id.clone(),
                finding: finding.clone(),
                spans,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Bot,
    Question,
}

impl std::str::FromStr for PromptStyle {
    type Err = RaterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bot" => Ok(PromptStyle::Bot),
            "question" => Ok(PromptStyle::Question),
            _ => Err(RaterError::Invalid(format!("unknown prompt style `{s}`"))),
        }
    }
}

const BOT_TEMPLATE: &str = "[Bot] I'm a helpful radiology assistant, who provides concise answers
to questions about information in a chest x-ray report.
[User] Determine the answer to the following question:
[Does the patient have {object}?],
given the context of the follow chest x-ray report: {report}
Do not mention conditions or parts of the report not relevant to the question.
Make sure to only answer: [Does the patient have {object}?]
[Bot]";

const QUESTION_TEMPLATE: &str = "You are a helpful medical knowledge assistant.
Provide useful, complete, concise, and scientifically-grounded
queries to radiology reports.

Does this report mention that the patient has {object}?
Report:{report}";

fn template(style: PromptStyle) -> &'static str {
    match style {
        PromptStyle::Bot => BOT_TEMPLATE,
        PromptStyle::Question => QUESTION_TEMPLATE,
    }
}

pub fn build_revision_prompt(
    report: &str,
    finding: &str,
    style: PromptStyle,
    catalog: &FindingCatalog,
) -> Result<String, RaterError> {
    let entry = catalog.get(finding)?;
    let (head, tail) = template(style).split_once("{report}").expect("template has a report slot");
    Ok(format!(
        "{}{report}{}",
        head.replace("{object}", &entry.object),
        tail.replace("{object}", &entry.object)
    ))
}

/// Recover the report text from a prompt built for `finding` and `style`.
pub fn extract_report(prompt: &str, finding: &str, style: PromptStyle, catalog: &FindingCatalog) -> Option<String> {
    let entry = catalog.get(finding).ok()?;
    let (head, tail) = template(style).split_once("{report}")?;
    let head = head.replace("{object}", &entry.object);
    let tail = tail.replace("{object}", &entry.object);
    prompt
        .strip_prefix(head.as_str())?
        .strip_suffix(tail.as_str())
        .map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flags_one_per_matched_finding() {
        let catalog = FindingCatalog::builtin();
        let reports = vec![
            ("r1".to_string(), "Mild CARDIOMEGALY. Small left pleural effusion.".to_string()),
            ("r2".to_string(), "Clear lungs.".to_string()),
        ];
        let flags = flag_reports(&reports, &catalog);
        let names: Vec<&str> = flags.iter().map(|f| f.finding.as_str()).collect();
        assert_eq!(names, ["Cardiomegaly", "Pleural Effusion"]);
        assert_eq!(flags[0].spans, vec![(5, 17)]);
        assert!(flags.iter().all(|f| f.report_id == "r1"));
    }

    #[test]
    fn prompt_contents() {
        let catalog = FindingCatalog::builtin();
        let bot = build_revision_prompt("No acute fracture.", "Fracture", PromptStyle::Bot, &catalog).unwrap();
        assert!(bot.contains("Does the patient have a fracture?"));
        assert!(bot.starts_with("[Bot] I'm a helpful radiology assistant"));
        let q = build_revision_prompt("x", "Fracture", PromptStyle::Question, &catalog).unwrap();
        assert!(q.starts_with("You are a helpful medical knowledge assistant."));
        assert!(matches!(
            build_revision_prompt("x", "Hernia", PromptStyle::Bot, &catalog),
            Err(RaterError::UnknownFinding(_))
        ));
    }

    proptest! {
        #[test]
        fn prompt_round_trip(report in "\\PC{0,80}", bot in any::<bool>()) {
            let catalog = FindingCatalog::builtin();
            let style = if bot { PromptStyle::Bot } else { PromptStyle::Question };
            for finding in catalog.0.keys() {
                let p = build_revision_prompt(&report, finding, style, &catalog).unwrap();
                prop_assert_eq!(extract_report(&p, finding, style, &catalog), Some(report.clone()));
            }
        }
    }
}
