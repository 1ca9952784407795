//! ROUGE-L F-measure from the token-level longest common subsequence.

pub const BETA: f64 = 1.2;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F = (1 + β²)·P·R / (R + β²·P) with β = 1.2. Two empty sequences score 1.
pub fn rouge_l(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let l = lcs_len(pred, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / pred.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = BETA * BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn worked_example() {
        assert_eq!(lcs_len(&t("a c e"), &t("a b c d e")), 3);
        let b2 = 1.44;
        let expected = (1.0 + b2) * 1.0 * 0.6 / (0.6 + b2 * 1.0);
        assert!((rouge_l(&t("a c e"), &t("a b c d e")) - expected).abs() < 1e-15);
        assert_eq!(rouge_l(&t("a b"), &t("a b")), 1.0);
        assert_eq!(rouge_l(&t("a b"), &t("c d")), 0.0);
    }
}
