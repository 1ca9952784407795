//! Mini-batch softmax probe trained with LARS (layer-wise adaptive rate
//! scaling), weights initialized from class text embeddings.

use super::logreg::{loss_and_grad, softmax, ProbeModel};
use super::{EmbeddingTable, LabelTable, ProbeError};
use crate::seed::indexed_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LarsConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub momentum: f64,
    pub trust: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for LarsConfig {
    fn default() -> Self {
        LarsConfig {
            lr: 0.2,
            batch: 512,
            epochs: 300,
            momentum: 0.9,
            trust: 0.001,
            weight_decay: 0.0,
            eps: 1e-9,
            seed: 0,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean cross-entropy gradient over `rows` for W (D x C) and b (C).
fn batch_grad(x: &EmbeddingTable, y: &[usize], rows: &[usize], w: &[f64], b: &[f64], c: usize) -> (Vec<f64>, Vec<f64>) {
    let d = x.d;
    let mut gw = vec![0.0; d * c];
    let mut gb = vec![0.0; c];
    for &i in rows {
        let xi = x.row(i);
        let mut z = b.to_vec();
        for (j, &xj) in xi.iter().enumerate() {
            for k in 0..c {
                z[k] += w[j * c + k] * xj;
            }
        }
        let p = softmax(&z);
        for k in 0..c {
            let r = p[k] - if k == y[i] { 1.0 } else { 0.0 };
            for (j, &xj) in xi.iter().enumerate() {
                gw[j * c + k] += r * xj;
            }
            gb[k] += r;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    gw.iter_mut().chain(gb.iter_mut()).for_each(|g| *g *= inv);
    (gw, gb)
}

/// `text_init` is D x C row-major. The bias starts at zero and is updated with
/// plain momentum SGD; only the weight matrix gets the LARS trust ratio.
pub fn train_lars_probe(x: &EmbeddingTable, y: &LabelTable, text_init: &[f64], config: &LarsConfig) -> Result<ProbeModel, ProbeError> {
    let (d, c) = (x.d, y.classes());
    if text_init.len() != d * c {
        return Err(ProbeError::ShapeMismatch(format!("text init has {} values, expected {d}x{c}", text_init.len())));
    }
    if x.n != y.labels.len() || x.n == 0 {
        return Err(ProbeError::ShapeMismatch(format!("{} rows vs {} labels", x.n, y.labels.len())));
    }
    if config.batch == 0 {
        return Err(ProbeError::Invalid("batch size 0".into()));
    }
    let mut w = text_init.to_vec();
    let mut b = vec![0.0; c];
    let mut vw = vec![0.0; d * c];
    let mut vb = vec![0.0; c];
    let mut order: Vec<usize> = (0..x.n).collect();
    let mut steps = 0;
    let mut last_grad = 0.0f64;
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut indexed_rng(config.seed, "lars_epoch", epoch as u64));
        for rows in order.chunks(config.batch) {
            let (gw, gb) = batch_grad(x, &y.labels, rows, &w, &b, c);
            let (w_norm, g_norm) = (norm(&w), norm(&gw));
            let local_lr = if w_norm > 0.0 && g_norm > 0.0 {
                config.trust * w_norm / (g_norm + config.weight_decay * w_norm + config.eps)
            } else {
                1.0
            };
            let scale = config.lr * local_lr;
            for k in 0..d * c {
                vw[k] = config.momentum * vw[k] + scale * (gw[k] + config.weight_decay * w[k]);
                w[k] -= vw[k];
            }
            for k in 0..c {
                vb[k] = config.momentum * vb[k] + config.lr * gb[k];
                b[k] -= vb[k];
            }
            last_grad = gw.iter().chain(&gb).fold(0.0, |m, g| m.max(g.abs()));
            steps += 1;
        }
    }
    if w.iter().chain(&b).any(|v| !v.is_finite()) {
        return Err(ProbeError::Invalid("training diverged".into()));
    }
    let theta: Vec<f64> = w.iter().chain(&b).copied().collect();
    let (final_loss, _) = loss_and_grad(&x.values, d, &y.labels, c, config.weight_decay, &theta);
    Ok(ProbeModel {
        d,
        c,
        weights: w,
        bias: b,
        lambda: config.weight_decay,
        iterations: steps,
        grad_norm: last_grad,
        final_loss,
        converged: false,
        seed: Some(config.seed),
        loss_history: Vec::new(),
    })
}
