//! Linear probes on frozen embeddings and their statistical evaluation.

pub mod auc;
pub mod bootstrap;
pub mod classify;
pub mod io;
pub mod ladder;
pub mod lars;
pub mod logreg;

pub use auc::{auc, macro_ovr_auc};
pub use bootstrap::{blocked_bootstrap_ci, BootstrapCi};
pub use classify::{classification_suite, f1_from, ClassificationReport};
pub use ladder::sample_ladder;
pub use lars::{train_lars_probe, LarsConfig};
pub use logreg::{select_hyperparams, train_logreg_l2, LogregConfig, ProbeModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("labels contain a single class")]
    SingleClassInput,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need both classes to compute AUC")]
    SingleClass,
    #[error("need at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("ladder floor {floor} exceeds {n} available rows")]
    FloorExceedsN { floor: usize, n: usize },
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("every bootstrap replicate failed")]
    AllReplicatesFailed,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub example_id: String,
    /// Slide or patient; the unit of bootstrap resampling.
    pub block_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

/// Row-major N x D feature matrix with per-row metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub row_meta: Vec<RowMeta>,
}

impl EmbeddingTable {
    pub fn new(n: usize, d: usize, values: Vec<f64>, row_meta: Vec<RowMeta>) -> Result<Self, ProbeError> {
        if values.len() != n * d {
            return Err(ProbeError::ShapeMismatch(format!("{} values for {n}x{d}", values.len())));
        }
        if row_meta.len() != n {
            return Err(ProbeError::ShapeMismatch(format!("{} metadata rows for {n} rows", row_meta.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProbeError::NonFinite { row: i / d, col: i % d });
        }
        Ok(EmbeddingTable { n, d, values, row_meta })
    }

    /// Table without metadata, for in-memory use.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProbeError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(ProbeError::ShapeMismatch("ragged rows".into()));
        }
        let meta = (0..rows.len())
            .map(|i| RowMeta {
                example_id: i.to_string(),
                block_id: i.to_string(),
                ..Default::default()
            })
            .collect();
        EmbeddingTable::new(rows.len(), d, rows.concat(), meta)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn subset(&self, rows: &[usize]) -> EmbeddingTable {
        EmbeddingTable {
            n: rows.len(),
            d: self.d,
            values: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            row_meta: rows.iter().map(|&i| self.row_meta[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabelTable {
    pub fn new(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, ProbeError> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(ProbeError::Invalid(format!("class index {bad} with {} classes", class_names.len())));
        }
        Ok(LabelTable { labels, class_names })
    }

    /// Labels named by their index.
    pub fn from_indices(labels: Vec<usize>) -> Self {
        let c = labels.iter().max().map_or(0, |m| m + 1).max(2);
        LabelTable {
            labels,
            class_names: (0..c).map(|i| i.to_string()).collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> LabelTable {
        LabelTable {
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}
