//! Multinomial logistic regression with an L2 penalty on the weights, fit by
//! full-batch descent along limited-memory BFGS directions with Armijo
//! backtracking. Every accepted step lowers the loss. Deterministic.

use super::auc::macro_ovr_auc;
use super::{EmbeddingTable, LabelTable, ProbeError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogregConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LogregConfig {
    fn default() -> Self {
        LogregConfig {
            max_iter: 10_000,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub d: usize,
    pub c: usize,
    /// Row-major D x C.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub final_loss: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Objective after each accepted step, starting at the initial point.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

impl ProbeModel {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (j, &xj) in x.iter().enumerate() {
            let row = &self.weights[j * self.c..(j + 1) * self.c];
            for (k, w) in row.iter().enumerate() {
                z[k] += w * xj;
            }
        }
        z
    }

    pub fn predict_proba(&self, x: &EmbeddingTable) -> Vec<Vec<f64>> {
        (0..x.n).map(|i| softmax(&self.logits(x.row(i)))).collect()
    }

    pub fn predict(&self, x: &EmbeddingTable) -> Vec<usize> {
        self.predict_proba(x)
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect()
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy + (lambda/2)·||W||² and its gradient. `theta` holds W
/// (row-major D x C) followed by the C biases.
pub fn loss_and_grad(x: &[f64], d: usize, y: &[usize], c: usize, lambda: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let n = y.len();
    let (w, b) = theta.split_at(d * c);
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        z.copy_from_slice(b);
        for (j, &xj) in xi.iter().enumerate() {
            for k in 0..c {
                z[k] += w[j * c + k] * xj;
            }
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[y[i]];
        for k in 0..c {
            let r = (z[k] - lse).exp() - if k == y[i] { 1.0 } else { 0.0 };
            for (j, &xj) in xi.iter().enumerate() {
                grad[j * c + k] += r * xj;
            }
            grad[d * c + k] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for g in grad.iter_mut() {
        *g *= inv_n;
    }
    let mut penalty = 0.0;
    for (g, &wv) in grad[..d * c].iter_mut().zip(w) {
        *g += lambda * wv;
        penalty += wv * wv;
    }
    (loss + 0.5 * lambda * penalty, grad)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const LBFGS_MEMORY: usize = 10;

/// Two-loop recursion: approximate -H⁻¹ g from stored (s, y, 1/yᵀs) pairs.
fn lbfgs_direction(g: &[f64], memory: &std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

fn check_labels(y: &LabelTable) -> Result<(), ProbeError> {
    let c = y.classes();
    let mut seen = vec![false; c];
    for &l in &y.labels {
        seen[l] = true;
    }
    let present = seen.iter().filter(|&&s| s).count();
    if present < 2 {
        return Err(ProbeError::SingleClassInput);
    }
    if present < c {
        let missing = seen.iter().position(|s| !s).unwrap();
        return Err(ProbeError::Invalid(format!("class {} has no training rows", y.class_names[missing])));
    }
    Ok(())
}

pub fn train_logreg_l2(x: &EmbeddingTable, y: &LabelTable, lambda: f64) -> Result<ProbeModel, ProbeError> {
    train_logreg_l2_with(x, y, lambda, LogregConfig::default())
}

pub fn train_logreg_l2_with(x: &EmbeddingTable, y: &LabelTable, lambda: f64, config: LogregConfig) -> Result<ProbeModel, ProbeError> {
    if x.n != y.labels.len() {
        return Err(ProbeError::ShapeMismatch(format!("{} rows vs {} labels", x.n, y.labels.len())));
    }
    if x.n < 2 {
        return Err(ProbeError::Invalid("need at least 2 rows".into()));
    }
    if !(lambda >= 0.0) {
        return Err(ProbeError::Invalid(format!("lambda {lambda}")));
    }
    check_labels(y)?;
    let (d, c) = (x.d, y.classes());
    let eval = |theta: &[f64]| loss_and_grad(&x.values, d, &y.labels, c, lambda, theta);

    let mut theta = vec![0.0; d * c + c];
    let (mut f, mut g) = eval(&theta);
    let mut history = vec![f];
    let mut memory: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        if inf_norm(&g) < config.grad_tol {
            converged = true;
            break;
        }
        let mut direction = lbfgs_direction(&g, &memory);
        let mut slope = dot(&direction, &g);
        if !(slope < 0.0) {
            memory.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        // First iteration: unit-length steepest step; afterwards the quasi-Newton step.
        let mut step = if memory.is_empty() { 1.0 / inf_norm(&g).max(1.0) } else { 1.0 };
        let accepted = loop {
            let trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, p)| t + step * p).collect();
            let (ft, gt) = eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                break Some((trial, ft, gt));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((trial, ft, gt)) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                continue;
            }
            // No representable decrease along the gradient: optimal to machine precision.
            break;
        };
        let sv: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&sv, &sv).sqrt() {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((sv, yv, 1.0 / sy));
        }
        theta = trial;
        f = ft;
        g = gt;
        history.push(f);
        iterations += 1;
    }
    if !converged && inf_norm(&g) < config.grad_tol {
        converged = true;
    }
    let bias = theta.split_off(d * c);
    Ok(ProbeModel {
        d,
        c,
        weights: theta,
        bias,
        lambda,
        iterations,
        grad_norm: inf_norm(&g),
        final_loss: f,
        converged,
        seed: None,
        loss_history: history,
    })
}

/// Train/validation data for one magnification (or any other feature variant).
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub name: String,
    pub train_x: &'a EmbeddingTable,
    pub train_y: &'a LabelTable,
    pub val_x: &'a EmbeddingTable,
    pub val_y: &'a LabelTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub lambda: f64,
    pub magnification: String,
    pub val_auc: f64,
    /// (magnification, lambda, validation macro AUC) for every grid point.
    pub grid: Vec<(String, f64, f64)>,
}

/// Pick the (lambda, candidate) pair with the best validation macro one-vs-rest
/// AUC. `candidates` are ordered coarsest first; ties go to the smaller lambda,
/// then the coarser candidate.
pub fn select_hyperparams(candidates: &[Candidate<'_>], lambda_grid: &[f64]) -> Result<Selection, ProbeError> {
    if candidates.is_empty() || lambda_grid.is_empty() {
        return Err(ProbeError::EmptyInput);
    }
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut grid = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for (li, &lambda) in lambdas.iter().enumerate() {
        for (ci, cand) in candidates.iter().enumerate() {
            let model = train_logreg_l2(cand.train_x, cand.train_y, lambda)?;
            let scores = model.predict_proba(cand.val_x);
            let value = macro_ovr_auc(&scores, &cand.val_y.labels)?;
            grid.push((cand.name.clone(), lambda, value));
            // Iteration order is (smaller lambda, coarser) first, so only a strict gain wins.
            if best.is_none_or(|(b, _, _)| value > b + 1e-12) {
                best = Some((value, li, ci));
            }
        }
    }
    let (val_auc, li, ci) = best.expect("nonempty grid");
    Ok(Selection {
        lambda: lambdas[li],
        magnification: candidates[ci].name.clone(),
        val_auc,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stage_rng;
    use rand::Rng;

    fn table(rows: &[Vec<f64>]) -> EmbeddingTable {
        EmbeddingTable::from_rows(rows).unwrap()
    }

    #[test]
    fn symmetric_points_split_at_zero() {
        let x = table(&[vec![-1.0], vec![1.0]]);
        let y = LabelTable::from_indices(vec![0, 1]);
        let m = train_logreg_l2(&x, &y, 1.0).unwrap();
        assert!(m.converged, "{m:?}");
        let p = m.predict_proba(&table(&[vec![0.0]]));
        assert!((p[0][1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn huge_lambda_gives_priors() {
        let x = table(&[vec![-1.0], vec![0.5], vec![1.0], vec![2.0]]);
        let y = LabelTable::from_indices(vec![0, 1, 1, 1]);
        let m = train_logreg_l2(&x, &y, 1e9).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-8));
        let p = m.predict_proba(&table(&[vec![7.0]]));
        assert!((p[0][1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn loss_history_non_increasing() {
        let mut rng = stage_rng(3, "logreg");
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels = rows.iter().map(|r| usize::from(r[0] + 0.3 * r[1] > 0.0) + usize::from(r[2] > 1.0)).collect();
        let m = train_logreg_l2(&table(&rows), &LabelTable::from_indices(labels), 0.1).unwrap();
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.grad_norm < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stage_rng(9, "fd");
        let (n, d, c) = (12, 3, 3);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<usize> = (0..n).map(|i| i % c).collect();
        for _ in 0..5 {
            let theta: Vec<f64> = (0..d * c + c).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = loss_and_grad(&x, d, &y, c, 0.3, &theta);
            for i in 0..theta.len() {
                let h = 1e-6;
                let mut tp = theta.clone();
                tp[i] += h;
                let mut tm = theta.clone();
                tm[i] -= h;
                let fd = (loss_and_grad(&x, d, &y, c, 0.3, &tp).0 - loss_and_grad(&x, d, &y, c, 0.3, &tm).0) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = table(&[vec![0.0], vec![1.0]]);
        assert_eq!(
            train_logreg_l2(&x, &LabelTable::from_indices(vec![1, 1]), 1.0).unwrap_err(),
            ProbeError::SingleClassInput
        );
    }

    #[test]
    fn tie_prefers_small_lambda_then_coarse() {
        // Perfectly separable: every grid point reaches validation AUC 1.
        let x = table(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]]);
        let y = LabelTable::from_indices(vec![0, 0, 1, 1]);
        let cands = [
            Candidate { name: "5x".into(), train_x: &x, train_y: &y, val_x: &x, val_y: &y },
            Candidate { name: "20x".into(), train_x: &x, train_y: &y, val_x: &x, val_y: &y },
        ];
        let s = select_hyperparams(&cands, &[10.0, 0.1, 1.0]).unwrap();
        assert_eq!((s.lambda, s.magnification.as_str()), (0.1, "5x"));
        assert_eq!(s.grid.len(), 6);
    }
}
