//! Polygenic-risk-score featurization and the genomics evaluation arithmetic.

pub mod eval;
pub mod image;
pub mod load;

pub use eval::{balanced_case_control, mcc, most_correlated_outcome, prob_from_likelihoods};
pub use image::{fit_norm, grid_side, render_genomic_image, GenomicImage, NormStats, BLOCK};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of stacked p-value thresholds, one per RGB channel.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum PrsError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("profile has {got} traits, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("both likelihoods are zero")]
    BothZero,
    #[error("invalid likelihood {0}")]
    InvalidLikelihood(f64),
    #[error("label vector `{0}` has a single class")]
    DegenerateLabels(String),
    #[error("label vectors differ in length ({0} vs {1})")]
    Misaligned(usize, usize),
    #[error("need {needed} {class} but only {available} exist")]
    InsufficientClassMembers { class: &'static str, needed: usize, available: usize },
    #[error("no in-distribution outcomes supplied")]
    NoOutcomes,
    #[error("missing or non-finite score for {individual} / {trait_id} / {threshold}")]
    MissingScore { individual: String, trait_id: String, threshold: String },
    #[error("input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn code(self) -> f64 {
        match self {
            Sex::Female => 0.0,
            Sex::Male => 1.0,
        }
    }

    pub fn parse(text: &str) -> Option<Sex> {
        match text.trim().to_ascii_lowercase().as_str() {
            "f" | "female" | "0" => Some(Sex::Female),
            "m" | "male" | "1" => Some(Sex::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: f64,
    pub sex: Sex,
    pub bmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrsProfile {
    pub individual_id: String,
    /// `scores[c][t]`: trait `t` at p-value threshold `c`.
    pub scores: [Vec<f64>; CHANNELS],
    pub demographics: Option<Demographics>,
}

impl PrsProfile {
    pub fn new(individual_id: impl Into<String>, scores: [Vec<f64>; CHANNELS]) -> Result<Self, PrsError> {
        let t = scores[0].len();
        for channel in &scores[1..] {
            if channel.len() != t {
                return Err(PrsError::LengthMismatch { expected: t, got: channel.len() });
            }
        }
        let individual_id = individual_id.into();
        if let Some(i) = scores.iter().flatten().position(|s| !s.is_finite()) {
            return Err(PrsError::MissingScore {
                individual: individual_id,
                trait_id: (i % t.max(1)).to_string(),
                threshold: (i / t.max(1)).to_string(),
            });
        }
        Ok(PrsProfile {
            individual_id,
            scores,
            demographics: None,
        })
    }

    pub fn trait_count(&self) -> usize {
        self.scores[0].len()
    }

    /// Flat feature vector for linear baselines: scores channel by channel,
    /// then age, sex and BMI when present.
    pub fn features(&self, with_demographics: bool) -> Vec<f64> {
        let mut out: Vec<f64> = self.scores.iter().flatten().copied().collect();
        if with_demographics {
            if let Some(d) = self.demographics {
                out.extend([d.age, d.sex.code(), d.bmi]);
            }
        }
        out
    }
}
