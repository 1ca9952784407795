//! Rank-based (Mann-Whitney) ROC AUC with average ranks for ties.

use super::ProbeError;

/// Area under the ROC curve for binary `labels`. Ties count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, ProbeError> {
    if scores.len() != labels.len() {
        return Err(ProbeError::ShapeMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(ProbeError::Invalid("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ProbeError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based average ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let average = (i + j + 2) as f64 / 2.0;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += average * positives as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Unweighted mean of one-vs-rest AUCs over the classes present in `labels`.
/// `scores[i][k]` is the score of row `i` for class `k`.
pub fn macro_ovr_auc(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64, ProbeError> {
    if scores.len() != labels.len() {
        return Err(ProbeError::ShapeMismatch(format!("{} rows vs {} labels", scores.len(), labels.len())));
    }
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(ProbeError::SingleClass);
    }
    let mut total = 0.0;
    for &k in &present {
        let column: Vec<f64> = scores
            .iter()
            .map(|row| row.get(k).copied().ok_or_else(|| ProbeError::ShapeMismatch(format!("no score column {k}"))))
            .collect::<Result<_, _>>()?;
        let binary: Vec<bool> = labels.iter().map(|&l| l == k).collect();
        total += auc(&column, &binary)?;
    }
    Ok(total / present.len() as f64)
}
