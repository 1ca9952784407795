use super::ProbeError;
use crate::seed::stage_rng;
use rand::seq::SliceRandom;

/// Default ladder, as fractions: 0.01%, 0.1%, 1%, 10% and 100%.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.0001, 0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_FLOOR: usize = 64;

/// Nested row subsets of size max(floor, round(f·N)), one per fraction, each
/// a prefix of a single seeded permutation. Subsets are returned sorted.
pub fn sample_ladder(n: usize, fractions: &[f64], floor: usize, seed: u64) -> Result<Vec<Vec<usize>>, ProbeError> {
    if floor > n {
        return Err(ProbeError::FloorExceedsN { floor, n });
    }
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(ProbeError::BadFraction(f));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stage_rng(seed, "sample_ladder"));
    Ok(fractions
        .iter()
        .map(|&f| {
            let size = ((f * n as f64).round() as usize).max(floor).min(n);
            let mut rows = perm[..size].to_vec();
            rows.sort_unstable();
            rows
        })
        .collect())
}
