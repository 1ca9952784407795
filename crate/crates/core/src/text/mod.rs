//! Automated text metrics over a shared normalization front end.

pub mod bleu;
pub mod cider;
pub mod report;
pub mod rouge;
pub mod sections;

pub use bleu::bleu4;
pub use cider::{cider, CiderScorer};
pub use report::MetricReport;
pub use rouge::{lcs_len, rouge_l};
pub use sections::{extract_sections, Sections};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("CIDEr needs a nonempty reference corpus")]
    EmptyCorpus,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeOptions {
    /// Drop "a", "an" and "the". Off by default.
    #[serde(default)]
    pub remove_articles: bool,
}

/// Normalized tokens plus the text they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub source: String,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// NFKC, lowercase, every character that is neither alphanumeric nor
/// whitespace becomes a space, then split on whitespace.
pub fn normalize_with(text: &str, options: NormalizeOptions) -> TokenSeq {
    let cleaned: String = text
        .nfkc()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let tokens = cleaned
        .split_whitespace()
        .filter(|t| !(options.remove_articles && matches!(*t, "a" | "an" | "the")))
        .map(str::to_string)
        .collect();
    TokenSeq {
        tokens,
        source: text.to_string(),
    }
}

pub fn normalize_answer(text: &str) -> TokenSeq {
    normalize_with(text, NormalizeOptions::default())
}

pub fn exact_match(pred: &str, gold: &str) -> bool {
    normalize_answer(pred).tokens == normalize_answer(gold).tokens
}

/// (precision, recall) from the multiset overlap of two token sequences.
/// An empty side has precision/recall 1 when both are empty, else 0.
pub fn token_precision_recall(pred: &[String], gold: &[String]) -> (f64, f64) {
    if pred.is_empty() || gold.is_empty() {
        let both = pred.is_empty() && gold.is_empty();
        let v = if both { 1.0 } else { 0.0 };
        return (v, v);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut tp = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    (tp as f64 / pred.len() as f64, tp as f64 / gold.len() as f64)
}

pub fn tokenized_f1_tokens(pred: &[String], gold: &[String]) -> f64 {
    let (p, r) = token_precision_recall(pred, gold);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn tokenized_f1(pred: &str, gold: &str) -> f64 {
    tokenized_f1_tokens(&normalize_answer(pred).tokens, &normalize_answer(gold).tokens)
}
