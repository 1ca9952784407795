pub mod featurize;
pub mod ingest;
pub mod labels;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod rate;
pub mod split;

use crate::{usage, CmdResult};

/// Comma-separated numbers, e.g. `0.7,0.15,0.15`.
pub fn parse_f64_list(text: &str) -> CmdResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("not a number: `{s}`"))))
        .collect()
}

pub fn parse_str_list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}
