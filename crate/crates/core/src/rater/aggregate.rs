//! Reader agreement against specialists, reader elimination and rubric summaries.

use super::kappa::quadratic_kappa;
use super::store::RubricRating;
use super::{ai_relative, AiRelative, CaseRecord, CaseStatus, RaterError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// AI-relative ordinal codes per case for one reader, X ratings dropped.
fn ordinal_codes(ratings: &[RubricRating], reader: &str) -> BTreeMap<String, usize> {
    ratings
        .iter()
        .filter(|r| r.reader_id == reader)
        .filter_map(|r| ai_relative(r.verdict, r.ai_is_report_a).ordinal().map(|o| (r.case_id.clone(), o)))
        .collect()
}

/// Quadratic kappa between two readers on the cases both rated with a non-X verdict.
pub fn pairwise_kappa(ratings: &[RubricRating], a: &str, b: &str) -> Result<f64, RaterError> {
    let ca = ordinal_codes(ratings, a);
    let cb = ordinal_codes(ratings, b);
    let (x, y): (Vec<usize>, Vec<usize>) = ca.iter().filter_map(|(case, &v)| cb.get(case).map(|&w| (v, w))).unzip();
    quadratic_kappa(&x, &y, 5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderAgreement {
    /// Kappa against each specialist other than the reader; `None` where undefined.
    pub against: BTreeMap<String, Option<f64>>,
    /// Mean over the defined kappas.
    pub mean: Option<f64>,
}

/// Mean quadratic kappa of every reader against the specialists.
pub fn mean_kappas(ratings: &[RubricRating], specialists: &BTreeSet<String>) -> BTreeMap<String, ReaderAgreement> {
    let readers: BTreeSet<&str> = ratings.iter().map(|r| r.reader_id.as_str()).collect();
    readers
        .into_iter()
        .map(|reader| {
            let against: BTreeMap<String, Option<f64>> = specialists
                .iter()
                .filter(|s| s.as_str() != reader)
                .map(|s| (s.clone(), pairwise_kappa(ratings, reader, s).ok()))
                .collect();
            let defined: Vec<f64> = against.values().flatten().copied().collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            (reader.to_string(), ReaderAgreement { against, mean })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub retained: BTreeSet<String>,
    pub eliminated: BTreeSet<String>,
    /// Readers kept only because no kappa against any specialist was defined.
    pub undetermined: BTreeSet<String>,
}

/// Drop readers whose mean kappa is strictly below `threshold`. Specialists are never dropped.
pub fn eliminate_readers(
    means: &BTreeMap<String, Option<f64>>,
    specialists: &BTreeSet<String>,
    threshold: f64,
) -> Result<Elimination, RaterError> {
    if specialists.is_empty() {
        return Err(RaterError::Invalid("at least one specialist is required".into()));
    }
    let mut out = Elimination {
        retained: specialists.clone(),
        eliminated: BTreeSet::new(),
        undetermined: BTreeSet::new(),
    };
    for (reader, mean) in means {
        if specialists.contains(reader) {
            continue;
        }
        match mean {
            Some(k) if *k < threshold => {
                out.eliminated.insert(reader.clone());
            }
            Some(_) => {
                out.retained.insert(reader.clone());
            }
            None => {
                out.retained.insert(reader.clone());
                out.undetermined.insert(reader.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    All,
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Counts in [`AiRelative::ORDERED`] order.
    pub counts: [usize; 5],
    pub total: usize,
    pub excluded_x: usize,
    /// Percentages (0–100) in the same order; empty when `total` is 0.
    pub percentages: Vec<f64>,
    /// AI much better + better + equal.
    pub superior_or_similar: Option<f64>,
    /// Superior or similar plus AI worse (same correct management).
    pub clinically_acceptable: Option<f64>,
}

impl GroupSummary {
    fn from_counts(counts: [usize; 5], excluded_x: usize) -> Self {
        let total: usize = counts.iter().sum();
        let pct = |c: usize| 100.0 * c as f64 / total as f64;
        let (percentages, sos, ca) = if total == 0 {
            (Vec::new(), None, None)
        } else {
            (
                counts.iter().map(|&c| pct(c)).collect(),
                Some(pct(counts[0] + counts[1] + counts[2])),
                Some(pct(counts[0] + counts[1] + counts[2] + counts[3])),
            )
        };
        GroupSummary {
            counts,
            total,
            excluded_x,
            percentages,
            superior_or_similar: sos,
            clinically_acceptable: ca,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSummary {
    pub groups: BTreeMap<Group, GroupSummary>,
    pub readers: BTreeSet<String>,
}

/// Category percentages over all, normal and abnormal cases, counting only
/// ratings from `retained` readers and dropping X.
pub fn aggregate_rubric(
    ratings: &[RubricRating],
    cases: &BTreeMap<String, CaseRecord>,
    retained: &BTreeSet<String>,
) -> Result<RubricSummary, RaterError> {
    let mut counts: BTreeMap<Group, ([usize; 5], usize)> =
        [Group::All, Group::Normal, Group::Abnormal].into_iter().map(|g| (g, ([0; 5], 0))).collect();
    let mut readers = BTreeSet::new();
    for r in ratings {
        let case = cases.get(&r.case_id).ok_or_else(|| RaterError::UnknownCase(r.case_id.clone()))?;
        if !retained.contains(&r.reader_id) {
            continue;
        }
        readers.insert(r.reader_id.clone());
        let group = match case.status {
            CaseStatus::Normal => Group::Normal,
            CaseStatus::Abnormal => Group::Abnormal,
        };
        let rel = ai_relative(r.verdict, r.ai_is_report_a);
        for g in [Group::All, group] {
            let entry = counts.get_mut(&g).expect("all groups present");
            match AiRelative::ORDERED.iter().position(|&c| c == rel) {
                Some(i) => entry.0[i] += 1,
                None => entry.1 += 1,
            }
        }
    }
    if counts[&Group::All].0.iter().sum::<usize>() == 0 {
        return Err(RaterError::EmptyAfterFiltering);
    }
    Ok(RubricSummary {
        groups: counts
            .into_iter()
            .map(|(g, (c, x))| (g, GroupSummary::from_counts(c, x)))
            .collect(),
        readers,
    })
}
