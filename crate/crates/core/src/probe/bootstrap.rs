//! Blocked (cluster) bootstrap with percentile intervals.
//!
//! Replicate `r` draws its blocks from an RNG seeded by (seed, r), so the
//! result does not depend on how replicates are scheduled across threads.

use super::ProbeError;
use crate::seed::indexed_rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub used: usize,
    pub failed: usize,
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Blocks are resampled with replacement (B draws from B blocks) and the
/// statistic is evaluated on the concatenated rows. Replicates whose
/// statistic errors are excluded and counted.
pub fn blocked_bootstrap_ci<F>(
    statistic: F,
    blocks: &BTreeMap<String, Vec<usize>>,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapCi, ProbeError>
where
    F: Fn(&[usize]) -> Result<f64, String> + Sync,
{
    if blocks.len() < 2 {
        return Err(ProbeError::TooFewBlocks(blocks.len()));
    }
    if !(alpha > 0.0 && alpha < 1.0) || replicates == 0 {
        return Err(ProbeError::Invalid(format!("alpha {alpha}, replicates {replicates}")));
    }
    let block_rows: Vec<&Vec<usize>> = blocks.values().collect();
    let all: Vec<usize> = block_rows.iter().flat_map(|b| b.iter().copied()).collect();
    let point = statistic(&all).map_err(ProbeError::Invalid)?;
    let b = block_rows.len();
    let values: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = indexed_rng(seed, "bootstrap", r as u64);
            let mut rows = Vec::with_capacity(all.len());
            for _ in 0..b {
                rows.extend_from_slice(block_rows[rng.random_range(0..b)]);
            }
            statistic(&rows).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut ok: Vec<f64> = values.into_iter().flatten().collect();
    let used = ok.len();
    if used == 0 {
        return Err(ProbeError::AllReplicatesFailed);
    }
    ok.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        point,
        lo: quantile_sorted(&ok, alpha / 2.0),
        hi: quantile_sorted(&ok, 1.0 - alpha / 2.0),
        alpha,
        replicates,
        used,
        failed: replicates - used,
    })
}

/// Group row indices by block id, in sorted block order.
pub fn blocks_from_ids<S: AsRef<str>>(ids: &[S]) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        out.entry(id.as_ref().to_string()).or_default().push(i);
    }
    out
}
