//! Contamination-free dataset splits: patient-level random splits and the
//! attribute-balanced three-way VQA split.

pub mod balance;
pub mod report;
pub mod synthetic;

pub use balance::{balance_split, BalanceObjective, BalanceResult, Constraints, RatioTarget};
pub use report::{split_report, SplitReport};

use crate::seed::stage_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("fractions must be positive and sum to 1 (got {0:?})")]
    BadFractions(Vec<f64>),
    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("objective weights must be nonnegative with a positive sum")]
    BadWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "val")]
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    /// Split names used for a k-way fraction list.
    pub fn for_arity(k: usize) -> &'static [Split] {
        match k {
            1 => &[Split::Train],
            2 => &[Split::Train, Split::Test],
            _ => &Split::ALL,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = SplitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" | "valid" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(SplitError::InvalidInput(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Region {
    Abdomen,
    Chest,
    Head,
    Other,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Abdomen, Region::Chest, Region::Head, Region::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Abdomen => "abdomen",
            Region::Chest => "chest",
            Region::Head => "head",
            Region::Other => "other",
        }
    }
}

impl TryFrom<String> for Region {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "abdomen" | "abd" => Region::Abdomen,
            "chest" => Region::Chest,
            "head" => Region::Head,
            _ => Region::Other,
        })
    }
}

impl From<Region> for String {
    fn from(r: Region) -> String {
        r.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AnswerType {
    Open,
    Closed,
}

impl TryFrom<String> for AnswerType {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(AnswerType::Open),
            "closed" => Ok(AnswerType::Closed),
            other => Err(format!("unknown answer type `{other}`")),
        }
    }
}

impl From<AnswerType> for String {
    fn from(a: AnswerType) -> String {
        match a {
            AnswerType::Open => "open".into(),
            AnswerType::Closed => "closed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub qa_id: String,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    pub region: Region,
    pub answer_type: AnswerType,
    pub question_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legacy_split: Option<Split>,
}

/// Image-level split assignment.
pub type SplitAssignment = BTreeMap<String, Split>;

pub fn validate_items(items: &[QaItem]) -> Result<(), SplitError> {
    let mut seen = BTreeSet::new();
    for item in items {
        if item.image_id.is_empty() {
            return Err(SplitError::InvalidInput(format!("item {} has an empty image_id", item.qa_id)));
        }
        if !seen.insert(item.qa_id.as_str()) {
            return Err(SplitError::InvalidInput(format!("duplicate qa_id {}", item.qa_id)));
        }
    }
    Ok(())
}

/// Membership of one record in one split, for leakage checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership<'a> {
    pub image_id: &'a str,
    pub patient_id: Option<&'a str>,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    /// Image ids appearing in more than one split, with the splits.
    pub images: BTreeMap<String, BTreeSet<Split>>,
    pub patients: BTreeMap<String, BTreeSet<Split>>,
}

impl ContaminationReport {
    pub fn is_clean(&self) -> bool {
        self.images.is_empty() && self.patients.is_empty()
    }
}

pub fn check_memberships<'a>(memberships: impl IntoIterator<Item = Membership<'a>>) -> ContaminationReport {
    let mut images: BTreeMap<String, BTreeSet<Split>> = BTreeMap::new();
    let mut patients: BTreeMap<String, BTreeSet<Split>> = BTreeMap::new();
    for m in memberships {
        images.entry(m.image_id.to_string()).or_default().insert(m.split);
        if let Some(p) = m.patient_id {
            patients.entry(p.to_string()).or_default().insert(m.split);
        }
    }
    images.retain(|_, s| s.len() > 1);
    patients.retain(|_, s| s.len() > 1);
    ContaminationReport { images, patients }
}

/// Leakage in an image-level assignment; items whose image is unassigned are ignored.
pub fn check_contamination(assignment: &SplitAssignment, items: &[QaItem]) -> ContaminationReport {
    check_memberships(items.iter().filter_map(|item| {
        assignment.get(&item.image_id).map(|&split| Membership {
            image_id: &item.image_id,
            patient_id: item.patient_id.as_deref(),
            split,
        })
    }))
}

/// Leakage in the items' own legacy split labels.
pub fn check_legacy(items: &[QaItem]) -> ContaminationReport {
    check_memberships(items.iter().filter_map(|item| {
        item.legacy_split.map(|split| Membership {
            image_id: &item.image_id,
            patient_id: item.patient_id.as_deref(),
            split,
        })
    }))
}

/// Shuffle `ids` by seed and cut into groups of floor(n * f) with the
/// remainder going to the first group. Duplicate ids are collapsed first.
pub fn patient_random_split(ids: &[String], fractions: &[f64], seed: u64) -> Result<BTreeMap<String, Split>, SplitError> {
    let total: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.len() > 3 || fractions.iter().any(|f| !(*f >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadFractions(fractions.to_vec()));
    }
    let mut unique: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    unique.shuffle(&mut stage_rng(seed, "patient_split"));
    let n = unique.len();
    let mut counts: Vec<usize> = fractions.iter().map(|f| (n as f64 * f + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    counts[0] += n - assigned;
    let names = Split::for_arity(fractions.len());
    let mut out = BTreeMap::new();
    let mut it = unique.into_iter();
    for (k, &count) in counts.iter().enumerate() {
        for id in it.by_ref().take(count) {
            out.insert(id, names[k]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(qa: &str, image: &str, patient: Option<&str>) -> QaItem {
        QaItem {
            qa_id: qa.into(),
            image_id: image.into(),
            patient_id: patient.map(Into::into),
            region: Region::Chest,
            answer_type: AnswerType::Closed,
            question_type: "Presence".into(),
            legacy_split: None,
        }
    }

    #[test]
    fn image_in_two_splits_is_reported() {
        let mut a = item("1", "X", None);
        a.legacy_split = Some(Split::Train);
        let mut b = item("2", "X", None);
        b.legacy_split = Some(Split::Test);
        let report = check_legacy(&[a, b]);
        assert_eq!(report.images.keys().collect::<Vec<_>>(), vec!["X"]);
    }

    #[test]
    fn disjoint_assignment_is_clean() {
        let items = [item("1", "A", Some("p")), item("2", "B", Some("q"))];
        let assignment: SplitAssignment = [("A".into(), Split::Train), ("B".into(), Split::Test)].into();
        assert!(check_contamination(&assignment, &items).is_clean());
    }

    #[test]
    fn patient_level_violation() {
        let items = [item("1", "A", Some("P")), item("2", "B", Some("P"))];
        let assignment: SplitAssignment = [("A".into(), Split::Train), ("B".into(), Split::Validation)].into();
        let report = check_contamination(&assignment, &items);
        assert!(report.images.is_empty());
        assert!(report.patients.contains_key("P"));
    }

    #[test]
    fn random_split_counts() {
        let ids: Vec<String> = (0..100).map(|i| format!("p{i}")).collect();
        let split = patient_random_split(&ids, &[0.7, 0.15, 0.15], 3).unwrap();
        let count = |s| split.values().filter(|&&v| v == s).count();
        assert_eq!((count(Split::Train), count(Split::Validation), count(Split::Test)), (70, 15, 15));
        assert_eq!(split, patient_random_split(&ids, &[0.7, 0.15, 0.15], 3).unwrap());
        let twenty = patient_random_split(&ids, &[0.6, 0.2, 0.2], 3).unwrap();
        assert_eq!(twenty.values().filter(|&&v| v == Split::Test).count(), 20);
        let pad = patient_random_split(&ids[..7], &[0.9, 0.1], 3).unwrap();
        // floor(6.3) = 6, floor(0.7) = 0, remainder 1 to train
        assert_eq!(pad.values().filter(|&&v| v == Split::Train).count(), 7);
    }

    #[test]
    fn single_patient_goes_to_train() {
        let split = patient_random_split(&["only".into()], &[1.0], 0).unwrap();
        assert_eq!(split["only"], Split::Train);
        assert!(patient_random_split(&["a".into()], &[0.5, 0.4], 0).is_err());
    }

    #[test]
    fn items_deserialize_leniently() {
        let item: QaItem = serde_json::from_str(
            r#"{"qa_id":"1","image_id":"synpic1","region":"ABD","answer_type":"OPEN","question_type":"PRES","legacy_split":"val"}"#,
        )
        .unwrap();
        assert_eq!(item.region, Region::Abdomen);
        assert_eq!(item.answer_type, AnswerType::Open);
        assert_eq!(item.legacy_split, Some(Split::Validation));
    }
}
