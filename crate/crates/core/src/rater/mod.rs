//! Blinded side-by-side report rating: presentation, storage, agreement
//! statistics, reader elimination, aggregation and label adjudication.

pub mod adjudicate;
pub mod aggregate;
pub mod kappa;
pub mod labels;
pub mod store;

pub use adjudicate::{adjudicate, Adjudication, LabelReview, LabelVerdict, Provenance};
pub use aggregate::{aggregate_rubric, eliminate_readers, mean_kappas, RubricSummary};
pub use kappa::{fleiss_kappa, quadratic_kappa, FleissResult};
pub use labels::{build_revision_prompt, flag_reports, FindingCatalog, PromptStyle};
pub use store::{RatingEvent, RatingStore, RubricRating};

use crate::seed::derive_seed;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RaterError {
    #[error("no shared cases with non-X verdicts (need at least 2, have {0})")]
    NoSharedCases(usize),
    #[error("kappa undefined: both raters gave a single constant verdict")]
    DegenerateMarginals,
    #[error("Fleiss kappa undefined: expected agreement is 1")]
    DegenerateAgreement,
    #[error("unequal rater counts per case: case {case} has {got}, expected {expected}")]
    UnequalRaters { case: usize, expected: usize, got: usize },
    #[error("no ratings left after reader elimination and X removal")]
    EmptyAfterFiltering,
    #[error("rating references unknown case `{0}`")]
    UnknownCase(String),
    #[error("no prompt template for finding `{0}`")]
    UnknownFinding(String),
    #[error("all three reviewers disagree and no senior verdict was given")]
    MissingAdjudicator,
    #[error("adjudication needs exactly 3 reviewer verdicts, got {0}")]
    ReviewerCount(usize),
    #[error("reader {reader} already rated case {case}")]
    Duplicate { case: String, reader: String },
    #[error("event log corrupt at line {line}: {reason}")]
    CorruptEventLog { line: usize, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The six rubric scores. A and B refer to presentation order, not origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    A2,
    A1,
    C,
    B1,
    B2,
    X,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [Verdict::A2, Verdict::A1, Verdict::C, Verdict::B1, Verdict::B2, Verdict::X];

    /// Same judgement with the two reports swapped.
    pub fn mirror(self) -> Verdict {
        match self {
            Verdict::A2 => Verdict::B2,
            Verdict::A1 => Verdict::B1,
            Verdict::B1 => Verdict::A1,
            Verdict::B2 => Verdict::A2,
            v => v,
        }
    }
}

impl FromStr for Verdict {
    type Err = RaterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verdict::ALL
            .into_iter()
            .find(|v| format!("{v:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RaterError::Invalid(format!("unknown verdict `{s}`")))
    }
}

/// Verdict restated from the AI report's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AiRelative {
    AiMuchBetter,
    AiBetter,
    Equal,
    AiWorse,
    AiMuchWorse,
    Neither,
}

impl AiRelative {
    /// The five ordered categories (X excluded), best first.
    pub const ORDERED: [AiRelative; 5] = [
        AiRelative::AiMuchBetter,
        AiRelative::AiBetter,
        AiRelative::Equal,
        AiRelative::AiWorse,
        AiRelative::AiMuchWorse,
    ];

    /// AI_much_worse = 0 .. AI_much_better = 4; `None` for Neither.
    pub fn ordinal(self) -> Option<usize> {
        match self {
            AiRelative::AiMuchWorse => Some(0),
            AiRelative::AiWorse => Some(1),
            AiRelative::Equal => Some(2),
            AiRelative::AiBetter => Some(3),
            AiRelative::AiMuchBetter => Some(4),
            AiRelative::Neither => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AiRelative::AiMuchBetter => "AI_much_better",
            AiRelative::AiBetter => "AI_better",
            AiRelative::Equal => "Equal",
            AiRelative::AiWorse => "AI_worse",
            AiRelative::AiMuchWorse => "AI_much_worse",
            AiRelative::Neither => "Neither",
        }
    }
}

impl fmt::Display for AiRelative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn ai_relative(verdict: Verdict, ai_is_report_a: bool) -> AiRelative {
    let v = if ai_is_report_a { verdict } else { verdict.mirror() };
    match v {
        Verdict::A2 => AiRelative::AiMuchBetter,
        Verdict::A1 => AiRelative::AiBetter,
        Verdict::C => AiRelative::Equal,
        Verdict::B1 => AiRelative::AiWorse,
        Verdict::B2 => AiRelative::AiMuchWorse,
        Verdict::X => AiRelative::Neither,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub case_id: String,
    pub dataset: String,
    pub status: CaseStatus,
    pub report_ai: String,
    pub report_original: String,
    #[serde(default)]
    pub image_refs: Vec<String>,
}

impl CaseRecord {
    pub fn validate(&self) -> Result<(), RaterError> {
        if self.report_ai.trim().is_empty() || self.report_original.trim().is_empty() {
            return Err(RaterError::Invalid(format!("case {} has an empty report", self.case_id)));
        }
        Ok(())
    }
}

/// What a reader sees. Deliberately has no field naming either report's origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PresentedPair {
    pub case_id: String,
    pub left_text: String,
    pub right_text: String,
    pub image_urls: Vec<String>,
}

/// The presentation plus the origin record, kept server side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presentation {
    pub pair: PresentedPair,
    pub ai_is_report_a: bool,
}

/// Deterministic coin flip per (case, seed) deciding which side shows the AI report.
pub fn blind_pair(case: &CaseRecord, seed: u64) -> Presentation {
    let ai_is_report_a = derive_seed(seed, &format!("blind_pair/{}", case.case_id)) & 1 == 1;
    let (left, right) = if ai_is_report_a {
        (&case.report_ai, &case.report_original)
    } else {
        (&case.report_original, &case.report_ai)
    };
    Presentation {
        pair: PresentedPair {
            case_id: case.case_id.clone(),
            left_text: left.clone(),
            right_text: right.clone(),
            image_urls: case.image_refs.clone(),
        },
        ai_is_report_a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn case(id: &str) -> CaseRecord {
        CaseRecord {
            case_id: id.into(),
            dataset: "synthetic".into(),
            status: CaseStatus::Normal,
            report_ai: format!("ai report {id}"),
            report_original: format!("original report {id}"),
            image_refs: vec![],
        }
    }

    #[test]
    fn relative_mapping() {
        assert_eq!(ai_relative(Verdict::A1, true), AiRelative::AiBetter);
        assert_eq!(ai_relative(Verdict::B2, false), AiRelative::AiMuchBetter);
        assert_eq!(ai_relative(Verdict::A2, false), AiRelative::AiMuchWorse);
        assert_eq!(ai_relative(Verdict::X, true), AiRelative::Neither);
        assert_eq!(ai_relative(Verdict::X, false), AiRelative::Neither);
        for v in Verdict::ALL {
            assert_eq!(ai_relative(v.mirror(), false), ai_relative(v, true));
            assert_eq!(v.mirror().mirror(), v);
        }
        assert_eq!("b1".parse::<Verdict>().unwrap(), Verdict::B1);
    }

    #[test]
    fn presentation_is_deterministic_and_balanced() {
        let c = case("c1");
        assert_eq!(blind_pair(&c, 7), blind_pair(&c, 7));
        let n = 10_000;
        let a = (0..n).filter(|i| blind_pair(&case(&format!("case{i}")), 7).ai_is_report_a).count();
        let frac = a as f64 / n as f64;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn payload_has_no_origin_field() {
        let p = blind_pair(&case("c1"), 1);
        let json = serde_json::to_value(&p.pair).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["case_id", "image_urls", "left_text", "right_text"]);
        assert!(!json.to_string().to_lowercase().contains("ai_is"));
    }
}
