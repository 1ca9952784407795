//! Quadratic-weighted Cohen's kappa and Fleiss' kappa.

use super::RaterError;

/// Quadratic-weighted kappa on paired ordinal codes in `0..k`.
/// Weights w_ij = (i − j)² / (k − 1)²; expected counts from the product of marginals.
pub fn quadratic_kappa(r1: &[usize], r2: &[usize], k: usize) -> Result<f64, RaterError> {
    if r1.len() != r2.len() {
        return Err(RaterError::Invalid(format!("{} vs {} ratings", r1.len(), r2.len())));
    }
    let n = r1.len();
    if n < 2 {
        return Err(RaterError::NoSharedCases(n));
    }
    if k < 2 || r1.iter().chain(r2).any(|&c| c >= k) {
        return Err(RaterError::Invalid(format!("codes must lie in 0..{k}")));
    }
    let constant = |r: &[usize]| r.iter().all(|&c| c == r[0]);
    if constant(r1) && constant(r2) {
        return Err(RaterError::DegenerateMarginals);
    }
    let mut m1 = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut observed = 0.0;
    let w = |i: usize, j: usize| {
        let d = i as f64 - j as f64;
        d * d / ((k - 1) * (k - 1)) as f64
    };
    for (&a, &b) in r1.iter().zip(r2) {
        m1[a] += 1.0;
        m2[b] += 1.0;
        observed += w(a, b);
    }
    let nf = n as f64;
    observed /= nf;
    let mut expected = 0.0;
    for (i, p1) in m1.iter().enumerate() {
        for (j, p2) in m2.iter().enumerate() {
            expected += w(i, j) * (p1 / nf) * (p2 / nf);
        }
    }
    if expected == 0.0 {
        return Err(RaterError::DegenerateMarginals);
    }
    Ok(1.0 - observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleissResult {
    pub kappa: f64,
    /// Fraction of cases on which every rater chose the same category.
    pub unanimity: f64,
    pub cases: usize,
    pub raters: usize,
}

/// Fleiss' kappa from a cases × categories count matrix with a fixed
/// number of raters per case.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<FleissResult, RaterError> {
    let first = counts.first().ok_or(RaterError::Invalid("no cases".into()))?;
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(RaterError::Invalid("need at least 2 raters per case".into()));
    }
    let k = first.len();
    let mut column = vec![0.0; k];
    let mut p_bar = 0.0;
    let mut unanimous = 0;
    for (case, row) in counts.iter().enumerate() {
        let got: usize = row.iter().sum();
        if row.len() != k || got != raters {
            return Err(RaterError::UnequalRaters { case, expected: raters, got });
        }
        let sq: usize = row.iter().map(|c| c * c).sum();
        p_bar += (sq - raters) as f64 / (raters * (raters - 1)) as f64;
        if row.contains(&raters) {
            unanimous += 1;
        }
        for (c, &v) in column.iter_mut().zip(row) {
            *c += v as f64;
        }
    }
    let n = counts.len() as f64;
    p_bar /= n;
    let total = n * raters as f64;
    let p_e: f64 = column.iter().map(|c| (c / total) * (c / total)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(RaterError::DegenerateAgreement);
    }
    Ok(FleissResult {
        kappa: (p_bar - p_e) / (1.0 - p_e),
        unanimity: unanimous as f64 / n,
        cases: counts.len(),
        raters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_hand_example() {
        // One adjacent disagreement on three cases: ΣwO = 1/48, ΣwE = 51/144, κ = 16/17.
        let k = quadratic_kappa(&[0, 2, 4], &[0, 3, 4], 5).unwrap();
        assert!((k - 16.0 / 17.0).abs() < 1e-12);
        assert_eq!(quadratic_kappa(&[0, 1, 4], &[0, 1, 4], 5).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_errors() {
        assert!(matches!(quadratic_kappa(&[1], &[1], 5), Err(RaterError::NoSharedCases(1))));
        assert!(matches!(quadratic_kappa(&[2, 2], &[2, 2], 5), Err(RaterError::DegenerateMarginals)));
        assert!(matches!(quadratic_kappa(&[2, 2], &[3, 3], 5), Err(RaterError::DegenerateMarginals)));
    }

    #[test]
    fn fleiss_hand_example() {
        // P̄ = 7/12, P_e = 23/72, κ = 19/49.
        let counts = vec![vec![3, 0, 0, 0], vec![2, 1, 0, 0], vec![0, 1, 1, 1], vec![0, 0, 3, 0]];
        let r = fleiss_kappa(&counts).unwrap();
        assert!((r.kappa - 19.0 / 49.0).abs() < 1e-12);
        assert_eq!(r.unanimity, 0.5);
    }

    #[test]
    fn fleiss_edges() {
        let perfect = vec![vec![3, 0, 0, 0], vec![0, 3, 0, 0], vec![0, 0, 0, 3]];
        assert_eq!(fleiss_kappa(&perfect).unwrap().kappa, 1.0);
        assert!(matches!(fleiss_kappa(&[vec![3, 0], vec![3, 0]]), Err(RaterError::DegenerateAgreement)));
        assert!(matches!(fleiss_kappa(&[vec![3, 0], vec![2, 0]]), Err(RaterError::UnequalRaters { case: 1, .. })));
    }

    proptest! {
        #[test]
        fn quadratic_is_symmetric(pairs in prop::collection::vec((0usize..5, 0usize..5), 2..40)) {
            let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            match (quadratic_kappa(&a, &b, 5), quadratic_kappa(&b, &a, 5)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!((x - y).abs() < 1e-12);
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric error"),
            }
        }
    }
}
