//! Sentence BLEU-4 without smoothing.

use std::collections::HashMap;

pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_default() += 1;
        }
    }
    out
}

/// Reference length closest to `c`; ties go to the shorter reference.
pub fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// Clipped n-gram precisions for n = 1..=4, geometric mean, times the
/// brevity penalty exp(1 − r/c) when the candidate is shorter than r.
/// Any zero precision gives 0.
pub fn bleu4(pred: &[String], refs: &[Vec<String>]) -> f64 {
    if pred.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(pred, n);
        let total: usize = cand.values().sum();
        if total == 0 {
            return 0.0;
        }
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_default();
                *e = (*e).max(c);
            }
        }
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let c = pred.len();
    let r = closest_ref_len(c, refs);
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identity_and_penalty() {
        let x = t("the heart size is normal");
        assert_eq!(bleu4(&x, std::slice::from_ref(&x)), 1.0);
        let short = t("heart size is normal");
        let score = bleu4(&short, std::slice::from_ref(&x));
        assert!((score - (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-15);
        assert_eq!(bleu4(&t("a b c"), &[t("a b c")]), 0.0);
        assert_eq!(bleu4(&t("x y z w"), &[x]), 0.0);
    }

    #[test]
    fn closest_length_ties_to_shorter() {
        assert_eq!(closest_ref_len(5, &[t("a b c d"), t("a b c d e f")]), 4);
        assert_eq!(closest_ref_len(5, &[t("a b c d e f g"), t("a b c d e f")]), 6);
    }
}
