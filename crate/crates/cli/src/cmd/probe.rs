//! `probe train|select|lars|eval|synth`

use crate::cmd::parse_f64_list;
use crate::{domain, usage, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::probe::bootstrap::blocks_from_ids;
use medeval_core::probe::io::{read_embeddings_bin, read_embeddings_csv, read_labels};
use medeval_core::probe::logreg::Candidate;
use medeval_core::probe::{
    auc, blocked_bootstrap_ci, classification_suite, macro_ovr_auc, select_hyperparams, train_lars_probe,
    train_logreg_l2, EmbeddingTable, LabelTable, LarsConfig, ProbeModel,
};
use medeval_core::seed::stage_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum ProbeCmd {
    /// L2-regularized logistic regression at one lambda.
    Train(TrainArgs),
    /// Grid search over lambda (and magnification) on validation macro AUC.
    Select(SelectArgs),
    /// Mini-batch LARS probe initialized from class text embeddings.
    Lars(LarsArgs),
    /// AUC with a patient-blocked bootstrap interval, plus label metrics.
    Eval(EvalArgs),
    /// Write a synthetic embedding table, labels and text initialization.
    Synth(ProbeSynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV (`example_id,block_id,[magnification],[split],f0,...`) or a float32 `.f32` file.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// JSON sidecar for a `.f32` embedding file; defaults to the same stem with `.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// CSV `example_id,label`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Comma-separated class names fixing the label order.
    #[arg(long)]
    pub classes: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Restrict training to rows whose split column equals this value.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Defaults to `probe.lambda_grid`.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long, default_value = "train")]
    pub train_split: String,
    #[arg(long, default_value = "validation")]
    pub val_split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LarsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV matrix with D rows and C columns (one column per class).
    #[arg(long)]
    pub text_init: PathBuf,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub split: Option<String>,
    /// Defaults to `probe.replicates`.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub rows: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
}

pub fn run(ctx: &Ctx, cmd: ProbeCmd) -> CmdResult {
    match cmd {
        ProbeCmd::Train(a) => train(ctx, &a),
        ProbeCmd::Select(a) => select(ctx, &a),
        ProbeCmd::Lars(a) => lars(ctx, &a),
        ProbeCmd::Eval(a) => eval(ctx, &a),
        ProbeCmd::Synth(a) => synth(ctx, &a.out, a.rows, a.dim),
    }
}

pub fn load(data: &DataArgs) -> CmdResult<(EmbeddingTable, LabelTable)> {
    let table = match data.embeddings.extension().and_then(|e| e.to_str()) {
        Some("f32") | Some("bin") => {
            let sidecar = data.sidecar.clone().unwrap_or_else(|| data.embeddings.with_extension("json"));
            read_embeddings_bin(&data.embeddings, &sidecar)?
        }
        _ => read_embeddings_csv(std::fs::File::open(&data.embeddings)?)?,
    };
    let classes = data.classes.as_deref().map(crate::cmd::parse_str_list);
    let labels = read_labels(std::fs::File::open(&data.labels)?, &table, classes.as_deref())?;
    Ok((table, labels))
}

fn rows_where(table: &EmbeddingTable, pred: impl Fn(&medeval_core::probe::RowMeta) -> bool) -> Vec<usize> {
    (0..table.n).filter(|&i| pred(&table.row_meta[i])).collect()
}

fn restrict(x: EmbeddingTable, y: LabelTable, split: Option<&str>) -> CmdResult<(EmbeddingTable, LabelTable)> {
    let Some(split) = split else { return Ok((x, y)) };
    let rows = rows_where(&x, |m| m.split.as_deref() == Some(split));
    if rows.is_empty() {
        return Err(domain(format!("no rows with split `{split}`")));
    }
    Ok((x.subset(&rows), y.subset(&rows)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    pub class_names: Vec<String>,
    pub model: ProbeModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lars: Option<LarsConfig>,
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> CmdResult {
    let (x, y) = load(&a.data)?;
    let (x, y) = restrict(x, y, a.split.as_deref())?;
    let model = train_logreg_l2(&x, &y, a.lambda)?;
    if !model.converged {
        log::warn!("stopped at iteration limit with gradient norm {:.3e}", model.grad_norm);
    }
    ctx.write_json(
        &a.out,
        &ModelFile {
            kind: "logreg_l2".into(),
            class_names: y.class_names.clone(),
            model,
            lars: None,
        },
    )
}

/// Numeric prefix of a magnification label such as `10x`; unparsable labels sort last.
fn magnification_order(label: &str) -> (f64, String) {
    let digits: String = label.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
    (digits.parse().unwrap_or(f64::INFINITY), label.to_string())
}

pub fn select(ctx: &Ctx, a: &SelectArgs) -> CmdResult {
    let grid = match &a.lambda_grid {
        Some(g) => parse_f64_list(g)?,
        None => ctx.config.probe.lambda_grid.clone(),
    };
    let (x, y) = load(&a.data)?;
    let mut mags: Vec<String> = x.row_meta.iter().map(|m| m.magnification.clone().unwrap_or_default()).collect();
    mags.sort_by(|p, q| {
        let (pa, pb) = magnification_order(p);
        let (qa, qb) = magnification_order(q);
        pa.total_cmp(&qa).then(pb.cmp(&qb))
    });
    mags.dedup();
    let mut parts = Vec::new();
    for mag in &mags {
        let in_mag = |m: &medeval_core::probe::RowMeta| m.magnification.clone().unwrap_or_default() == *mag;
        let tr = rows_where(&x, |m| in_mag(m) && m.split.as_deref() == Some(a.train_split.as_str()));
        let va = rows_where(&x, |m| in_mag(m) && m.split.as_deref() == Some(a.val_split.as_str()));
        if tr.is_empty() || va.is_empty() {
            return Err(domain(format!("magnification `{mag}` lacks {} or {} rows", a.train_split, a.val_split)));
        }
        parts.push((mag.clone(), x.subset(&tr), y.subset(&tr), x.subset(&va), y.subset(&va)));
    }
    let candidates: Vec<Candidate<'_>> = parts
        .iter()
        .map(|(name, tx, ty, vx, vy)| Candidate {
            name: name.clone(),
            train_x: tx,
            train_y: ty,
            val_x: vx,
            val_y: vy,
        })
        .collect();
    let selection = select_hyperparams(&candidates, &grid)?;
    log::info!("selected lambda {} ({}) with validation AUC {:.4}", selection.lambda, selection.magnification, selection.val_auc);
    ctx.write_json(&a.out, &selection)
}

fn read_matrix_csv(path: &Path) -> CmdResult<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| domain(format!("{}:{}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    let c = rows.first().map_or(0, Vec::len);
    if c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(domain(format!("{}: empty or ragged matrix", path.display())));
    }
    Ok((rows.len(), c, rows.concat()))
}

pub fn lars(ctx: &Ctx, a: &LarsArgs) -> CmdResult {
    let (x, y) = load(&a.data)?;
    let (x, y) = restrict(x, y, a.split.as_deref())?;
    let (d, c, init) = read_matrix_csv(&a.text_init)?;
    if d != x.d || c != y.classes() {
        return Err(domain(format!("text init is {d}x{c}, expected {}x{}", x.d, y.classes())));
    }
    let defaults = LarsConfig::default();
    let config = LarsConfig {
        lr: a.lr.unwrap_or(defaults.lr),
        batch: a.batch.unwrap_or(defaults.batch),
        epochs: a.epochs.unwrap_or(ctx.config.probe.lars_epochs),
        seed: medeval_core::seed::derive_seed(ctx.seed(), "probe_lars"),
        ..defaults
    };
    let model = train_lars_probe(&x, &y, &init, &config)?;
    ctx.write_json(
        &a.out,
        &ModelFile {
            kind: "lars".into(),
            class_names: y.class_names.clone(),
            model,
            lars: Some(config),
        },
    )
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub metric: String,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_replicates_used: usize,
    pub n_replicates_failed: usize,
    pub alpha: f64,
    pub blocks: usize,
    pub rows: usize,
    pub classification: medeval_core::probe::ClassificationReport,
}

/// AUC of the positive class for binary problems, macro one-vs-rest otherwise.
fn auc_of(probs: &[Vec<f64>], labels: &[usize], rows: &[usize], classes: usize) -> Result<f64, String> {
    let p: Vec<Vec<f64>> = rows.iter().map(|&i| probs[i].clone()).collect();
    let l: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
    if classes == 2 {
        let s: Vec<f64> = p.iter().map(|r| r[1]).collect();
        let b: Vec<bool> = l.iter().map(|&v| v == 1).collect();
        auc(&s, &b).map_err(|e| e.to_string())
    } else {
        macro_ovr_auc(&p, &l).map_err(|e| e.to_string())
    }
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> CmdResult {
    let file: ModelFile = serde_json::from_slice(&std::fs::read(&a.model)?)
        .map_err(|e| usage(format!("{}: {e}", a.model.display())))?;
    let (x, y) = load(&a.data)?;
    let (x, y) = restrict(x, y, a.split.as_deref())?;
    if x.d != file.model.d || y.classes() != file.model.c {
        return Err(domain(format!(
            "model is {}x{}, data is {}x{}",
            file.model.d,
            file.model.c,
            x.d,
            y.classes()
        )));
    }
    let probs = file.model.predict_proba(&x);
    let pred = file.model.predict(&x);
    let classification = classification_suite(&pred, &y.labels)?;
    let blocks = blocks_from_ids(&x.row_meta.iter().map(|m| m.block_id.as_str()).collect::<Vec<_>>());
    let replicates = a.replicates.unwrap_or(ctx.config.probe.replicates);
    let seed = medeval_core::seed::derive_seed(ctx.seed(), "probe_eval");
    let c = y.classes();
    let ci = blocked_bootstrap_ci(
        |rows: &[usize]| auc_of(&probs, &y.labels, rows, c),
        &blocks,
        replicates,
        ctx.config.probe.alpha,
        seed,
    )?;
    let report = EvalReport {
        metric: if c == 2 { "auc".into() } else { "macro_ovr_auc".into() },
        point: ci.point,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n_replicates_used: ci.used,
        n_replicates_failed: ci.failed,
        alpha: ci.alpha,
        blocks: blocks.len(),
        rows: x.n,
        classification,
    };
    log::info!("{} {:.4} [{:.4}, {:.4}]", report.metric, report.point, report.ci_lo, report.ci_hi);
    ctx.write_json(&a.out, &report)
}

/// Two Gaussian classes with a mean shift along a random direction, grouped
/// into patients of four rows, with train/validation/test splits by patient.
pub fn synth(ctx: &Ctx, out: &Path, rows: usize, dim: usize) -> CmdResult {
    if dim == 0 || rows < 12 {
        return Err(usage("need --dim >= 1 and --rows >= 12"));
    }
    let mut rng = stage_rng(ctx.seed(), "probe_synth");
    let direction: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut emb = String::from("example_id,block_id,split");
    for k in 0..dim {
        write!(emb, ",f{k}").unwrap();
    }
    emb.push('\n');
    let mut labels = String::from("example_id,label\n");
    for i in 0..rows {
        let patient = i / 4;
        let split = match patient % 5 {
            0 => "validation",
            1 => "test",
            _ => "train",
        };
        let positive = rng.random_bool(0.5);
        write!(emb, "r{i:05},p{patient:04},{split}").unwrap();
        for v in &direction {
            let noise: f64 = rng.random_range(-1.0..1.0);
            let shift = if positive { 0.25 } else { -0.25 };
            write!(emb, ",{:.6}", shift * v + noise).unwrap();
        }
        emb.push('\n');
        writeln!(labels, "r{i:05},{}", if positive { "positive" } else { "negative" }).unwrap();
    }
    let mut init = String::new();
    for v in &direction {
        writeln!(init, "{:.6},{:.6}", -v, v).unwrap();
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("embeddings.csv"), emb)?;
    std::fs::write(out.join("labels.csv"), labels)?;
    std::fs::write(out.join("text_init.csv"), init)?;
    Ok(())
}
