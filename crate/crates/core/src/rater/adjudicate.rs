//! Three-reviewer label adjudication with a senior tie-break.

use super::RaterError;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelVerdict {
    Positive,
    Negative,
    Uncertain,
    NotMentioned,
}

impl LabelVerdict {
    pub const ALL: [LabelVerdict; 4] =
        [LabelVerdict::Positive, LabelVerdict::Negative, LabelVerdict::Uncertain, LabelVerdict::NotMentioned];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for LabelVerdict {
    type Err = RaterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(LabelVerdict::Positive),
            "negative" | "neg" => Ok(LabelVerdict::Negative),
            "uncertain" => Ok(LabelVerdict::Uncertain),
            "not_mentioned" | "not mentioned" | "none" => Ok(LabelVerdict::NotMentioned),
            other => Err(RaterError::Invalid(format!("unknown label verdict `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelReview {
    pub report_id: String,
    pub finding: String,
    pub reviewers: Vec<LabelVerdict>,
    #[serde(default)]
    pub senior: Option<LabelVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Unanimous,
    Majority,
    Senior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjudication {
    pub verdict: LabelVerdict,
    pub provenance: Provenance,
}

/// Unanimous verdicts stand, a 2-of-3 majority wins, and a three-way split
/// takes the senior reviewer's verdict.
pub fn adjudicate(review: &LabelReview) -> Result<Adjudication, RaterError> {
    let v = &review.reviewers;
    if v.len() != 3 {
        return Err(RaterError::ReviewerCount(v.len()));
    }
    if v[0] == v[1] && v[1] == v[2] {
        return Ok(Adjudication { verdict: v[0], provenance: Provenance::Unanimous });
    }
    if let Some(&m) = v.iter().find(|&&x| v.iter().filter(|&&y| y == x).count() == 2) {
        return Ok(Adjudication { verdict: m, provenance: Provenance::Majority });
    }
    let verdict = review.senior.ok_or(RaterError::MissingAdjudicator)?;
    Ok(Adjudication { verdict, provenance: Provenance::Senior })
}

/// Cases × category counts for Fleiss' kappa over the reviewer verdicts.
pub fn review_counts(reviews: &[LabelReview]) -> Vec<Vec<usize>> {
    reviews
        .iter()
        .map(|r| {
            let mut row = vec![0; LabelVerdict::ALL.len()];
            for v in &r.reviewers {
                row[v.index()] += 1;
            }
            row
        })
        .collect()
}
