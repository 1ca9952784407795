use super::PrsError;
use crate::seed::stage_rng;
use std::collections::BTreeMap;

/// Probability of the positive class as the ratio of the two likelihoods.
pub fn prob_from_likelihoods(l_pos: f64, l_neg: f64) -> Result<f64, PrsError> {
    for l in [l_pos, l_neg] {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(PrsError::InvalidLikelihood(l));
        }
    }
    if l_pos + l_neg == 0.0 {
        return Err(PrsError::BothZero);
    }
    Ok(l_pos / (l_pos + l_neg))
}

/// Matthews correlation coefficient between two aligned binary vectors.
pub fn mcc(a: &[bool], b: &[bool]) -> Result<f64, PrsError> {
    if a.len() != b.len() {
        return Err(PrsError::Misaligned(a.len(), b.len()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fn_ += 1.0,
        }
    }
    let denom: f64 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Err(PrsError::DegenerateLabels(String::new()));
    }
    Ok((tp * tn - fp * fn_) / denom.sqrt())
}

fn require_both_classes(name: &str, labels: &[bool]) -> Result<(), PrsError> {
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(PrsError::DegenerateLabels(name.to_string()));
    }
    Ok(())
}

/// In-distribution outcome with the highest MCC against the out-of-distribution
/// labels. Ties go to the alphabetically first outcome.
pub fn most_correlated_outcome(ood: &[bool], outcomes: &BTreeMap<String, Vec<bool>>) -> Result<(String, f64), PrsError> {
    require_both_classes("ood", ood)?;
    let mut best: Option<(String, f64)> = None;
    for (name, labels) in outcomes {
        require_both_classes(name, labels)?;
        let m = mcc(ood, labels)?;
        // Iteration is alphabetical, so a strict comparison keeps the first on ties.
        if best.as_ref().is_none_or(|(_, b)| m > *b) {
            best = Some((name.clone(), m));
        }
    }
    best.ok_or(PrsError::NoOutcomes)
}

/// Seeded sample of `n_cases` positives and `n_controls` negatives, returned sorted.
pub fn balanced_case_control(labels: &[bool], n_cases: usize, n_controls: usize, seed: u64) -> Result<Vec<usize>, PrsError> {
    let cases: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let controls: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    for (class, pool, needed) in [("cases", &cases, n_cases), ("controls", &controls, n_controls)] {
        if pool.len() < needed {
            return Err(PrsError::InsufficientClassMembers {
                class,
                needed,
                available: pool.len(),
            });
        }
    }
    let mut rng = stage_rng(seed, "case_control");
    let mut out: Vec<usize> = rand::seq::index::sample(&mut rng, cases.len(), n_cases)
        .into_iter()
        .map(|i| cases[i])
        .collect();
    out.extend(
        rand::seq::index::sample(&mut rng, controls.len(), n_controls)
            .into_iter()
            .map(|i| controls[i]),
    );
    out.sort_unstable();
    Ok(out)
}
