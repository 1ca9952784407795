//! Confusion-matrix metrics for label predictions.

use super::ProbeError;
use serde::{Deserialize, Serialize};

/// Harmonic mean of PPV and sensitivity; 0 when both are 0.
pub fn f1_from(ppv: f64, sensitivity: f64) -> f64 {
    if ppv + sensitivity == 0.0 {
        0.0
    } else {
        2.0 * ppv * sensitivity / (ppv + sensitivity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// Binary metrics treat class 1 as positive; `None` for multi-class or a zero denominator.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub mcc: f64,
    pub per_class_f1: Vec<f64>,
    /// Classes with no true and no predicted instances; their F1 is reported as 0.
    pub undefined_f1: Vec<usize>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_suite(pred: &[usize], truth: &[usize]) -> Result<ClassificationReport, ProbeError> {
    if pred.len() != truth.len() {
        return Err(ProbeError::ShapeMismatch(format!("{} predictions vs {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(ProbeError::EmptyInput);
    }
    let c = pred.iter().chain(truth).max().unwrap() + 1;
    let c = c.max(2);
    let mut m = vec![vec![0usize; c]; c];
    for (&p, &t) in pred.iter().zip(truth) {
        m[t][p] += 1;
    }
    let n = pred.len();
    let correct: usize = (0..c).map(|k| m[k][k]).sum();
    let true_count: Vec<usize> = (0..c).map(|k| m[k].iter().sum()).collect();
    let pred_count: Vec<usize> = (0..c).map(|k| (0..c).map(|t| m[t][k]).sum()).collect();

    let mut per_class_f1 = Vec::with_capacity(c);
    let mut undefined_f1 = Vec::new();
    for k in 0..c {
        let tp = m[k][k];
        let den = true_count[k] + pred_count[k];
        if den == 0 {
            undefined_f1.push(k);
            per_class_f1.push(0.0);
        } else {
            per_class_f1.push(2.0 * tp as f64 / den as f64);
        }
    }
    let macro_f1 = per_class_f1.iter().sum::<f64>() / c as f64;
    let weighted_f1 = (0..c).map(|k| per_class_f1[k] * true_count[k] as f64).sum::<f64>() / n as f64;

    // Multi-class MCC (Gorodkin), equal to the binary formula when c = 2.
    let (nf, cf) = (n as f64, correct as f64);
    let sum_tp: f64 = (0..c).map(|k| true_count[k] as f64 * pred_count[k] as f64).sum();
    let sum_t2: f64 = true_count.iter().map(|&t| (t * t) as f64).sum();
    let sum_p2: f64 = pred_count.iter().map(|&p| (p * p) as f64).sum();
    let den = ((nf * nf - sum_p2) * (nf * nf - sum_t2)).sqrt();
    let mcc = if den == 0.0 { 0.0 } else { (cf * nf - sum_tp) / den };

    let binary = c == 2;
    let (tp, fn_, fp, tn) = (m[1][1], m[1][0], m[0][1], m[0][0]);
    Ok(ClassificationReport {
        accuracy: correct as f64 / nf,
        sensitivity: if binary { ratio(tp, tp + fn_) } else { None },
        specificity: if binary { ratio(tn, tn + fp) } else { None },
        f1: if binary { (2 * tp + fp + fn_ > 0).then(|| per_class_f1[1]) } else { None },
        macro_f1,
        weighted_f1,
        mcc,
        per_class_f1,
        undefined_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn confusion(tp: usize, fn_: usize, fp: usize, tn: usize) -> (Vec<usize>, Vec<usize>) {
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (p, t, n) in [(1, 1, tp), (0, 1, fn_), (1, 0, fp), (0, 0, tn)] {
            pred.extend(std::iter::repeat_n(p, n));
            truth.extend(std::iter::repeat_n(t, n));
        }
        (pred, truth)
    }

    #[test]
    fn hand_worked_binary() {
        let (pred, truth) = confusion(8, 2, 4, 6);
        let r = classification_suite(&pred, &truth).unwrap();
        assert!((r.sensitivity.unwrap() - 0.8).abs() < 1e-15);
        assert!((r.specificity.unwrap() - 0.6).abs() < 1e-15);
        let expected = 2.0 * (8.0 / 12.0) * 0.8 / (8.0 / 12.0 + 0.8);
        assert!((r.f1.unwrap() - expected).abs() < 1e-15);
        assert!((f1_from(8.0 / 12.0, 0.8) - expected).abs() < 1e-15);
        assert!((r.accuracy - 0.7).abs() < 1e-15);
        let mcc = (8.0 * 6.0 - 4.0 * 2.0) / ((12.0f64) * 10.0 * 10.0 * 8.0).sqrt();
        assert!((r.mcc - mcc).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 1, 0, 2];
        let r = classification_suite(&labels, &labels).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.weighted_f1, r.mcc), (1.0, 1.0, 1.0, 1.0));
        let r = classification_suite(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!((r.sensitivity, r.specificity, r.f1), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn undefined_class_f1_reported() {
        let r = classification_suite(&[0, 0, 2], &[0, 0, 2]).unwrap();
        assert_eq!(r.undefined_f1, vec![1]);
        assert_eq!(r.per_class_f1, vec![1.0, 0.0, 1.0]);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(classification_suite(&[], &[]).unwrap_err(), ProbeError::EmptyInput);
    }
}
