//! `pipeline demo`: every stage on synthetic inputs, wired through manifests.
//!
//! Each stage reads the previous stage's files, so a run doubles as a check
//! that outputs are valid inputs to their consumers. `pipeline.jsonl` lists
//! every output file with its SHA-256.

use crate::cmd::{featurize, ingest, labels, metrics, probe, rate, split};
use crate::{domain, rel_path, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::rater::{ai_relative, blind_pair, CaseRecord, CaseStatus, LabelReview, LabelVerdict, RubricRating, Verdict};
use medeval_core::seed::stage_rng;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum PipelineCmd {
    /// Run ingest, featurize, split, probe, metrics, labels and rating on synthetic data.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Proposal budget for the split search; the full default is slow for a demo.
    #[arg(long, default_value_t = 20_000)]
    pub split_budget: u64,
    /// Bootstrap replicates for probe evaluation.
    #[arg(long, default_value_t = 1_000)]
    pub replicates: usize,
}

pub fn run(ctx: &Ctx, cmd: PipelineCmd) -> CmdResult {
    match cmd {
        PipelineCmd::Demo(a) => demo(ctx, &a),
    }
}

const SENTENCES: [&str; 10] = [
    "no focal consolidation",
    "mild cardiomegaly",
    "small left pleural effusion",
    "right lower lobe opacity concerning for pneumonia",
    "no pneumothorax",
    "endotracheal tube terminates above the carina",
    "healed right rib fracture",
    "lungs are clear",
    "mild pulmonary edema",
    "stable left basilar atelectasis",
];

fn synth_report(rng: &mut impl Rng) -> String {
    let pick = |rng: &mut dyn rand::RngCore| *SENTENCES.choose(rng).expect("non-empty");
    let (a, b, c) = (pick(rng), pick(rng), pick(rng));
    format!("FINDINGS: {a}. {b}. IMPRESSION: {c}.")
}

/// Same report with one sentence swapped about half the time.
fn perturb(report: &str, rng: &mut impl Rng) -> String {
    if rng.random_bool(0.5) {
        return report.to_string();
    }
    let from = SENTENCES.iter().find(|s| report.contains(*s)).copied().unwrap_or(SENTENCES[0]);
    let to = *SENTENCES.choose(rng).expect("non-empty");
    report.replacen(from, to, 1)
}

fn write_jsonl<T: Serialize>(ctx: &Ctx, path: &Path, kind: &str, rows: &[T]) -> CmdResult {
    let mut m = ctx.manifest(path)?;
    for r in rows {
        m.write(kind, r)?;
    }
    m.finish()?;
    Ok(())
}

/// The presented verdict that means ordinal `q` for the AI report.
fn verdict_for(q: usize, ai_is_report_a: bool) -> Verdict {
    Verdict::ALL
        .into_iter()
        .find(|&v| ai_relative(v, ai_is_report_a).ordinal() == Some(q))
        .expect("every ordinal has a verdict")
}

fn text_stage(ctx: &Ctx, out: &Path) -> CmdResult {
    let mut rng = stage_rng(ctx.seed(), "demo_text");
    let dir = out.join("text");
    let mut examples = Vec::new();
    let mut reports = Vec::new();
    let mut reviews = Vec::new();
    for i in 0..30 {
        let reference = synth_report(&mut rng);
        let prediction = perturb(&reference, &mut rng);
        let id = format!("study{i:03}");
        examples.push(serde_json::json!({ "id": id, "prediction": prediction, "references": [reference] }));
        reports.push(labels::ReportText { report_id: id.clone(), text: reference.clone() });
        let truth = *LabelVerdict::ALL.choose(&mut rng).expect("non-empty");
        let reviewers: Vec<LabelVerdict> = (0..3)
            .map(|_| if rng.random_bool(0.75) { truth } else { *LabelVerdict::ALL.choose(&mut rng).expect("non-empty") })
            .collect();
        reviews.push(LabelReview {
            report_id: id,
            finding: "Pleural Effusion".into(),
            reviewers,
            senior: Some(truth),
        });
    }
    write_jsonl(ctx, &dir.join("examples.jsonl"), "text_example", &examples)?;
    write_jsonl(ctx, &dir.join("reports.jsonl"), "report_text", &reports)?;
    write_jsonl(ctx, &dir.join("reviews.jsonl"), "label_review", &reviews)?;
    metrics::run_scores(
        ctx,
        &metrics::RunArgs {
            input: dir.join("examples.jsonl"),
            metrics: None,
            section: metrics::SectionChoice::Full,
            out: dir.join("metrics.jsonl"),
            per_example: Some(dir.join("metrics_per_example.jsonl")),
        },
    )?;
    metrics::run_scores(
        ctx,
        &metrics::RunArgs {
            input: dir.join("examples.jsonl"),
            metrics: None,
            section: metrics::SectionChoice::Impression,
            out: dir.join("metrics_impression.jsonl"),
            per_example: None,
        },
    )?;
    labels::flag(
        ctx,
        &labels::FlagArgs {
            reports: dir.join("reports.jsonl"),
            catalog: None,
            out: dir.join("flags.jsonl"),
        },
    )?;
    labels::prompt(
        ctx,
        &labels::PromptArgs {
            style: "question".into(),
            text: None,
            finding: None,
            reports: Some(dir.join("reports.jsonl")),
            flags: Some(dir.join("flags.jsonl")),
            catalog: None,
            out: Some(dir.join("prompts.jsonl")),
        },
    )?;
    labels::adjudicate_cmd(
        ctx,
        &labels::AdjudicateArgs {
            reviews: dir.join("reviews.jsonl"),
            out: dir.join("adjudicated.jsonl"),
        },
    )
}

fn rating_stage(ctx: &Ctx, out: &Path) -> CmdResult {
    let mut rng = stage_rng(ctx.seed(), "demo_rating");
    let dir = out.join("rating");
    let cases: Vec<CaseRecord> = (0..40)
        .map(|i| {
            let original = synth_report(&mut rng);
            CaseRecord {
                case_id: format!("case{i:03}"),
                dataset: "synthetic".into(),
                status: if i % 2 == 0 { CaseStatus::Normal } else { CaseStatus::Abnormal },
                report_ai: perturb(&original, &mut rng),
                report_original: original,
                image_refs: vec![format!("images/case{i:03}.png")],
            }
        })
        .collect();
    write_jsonl(ctx, &dir.join("cases.jsonl"), "rating_case", &cases)?;
    let log = dir.join("ratings.log.jsonl");
    if log.exists() {
        std::fs::remove_file(&log)?;
    }
    let store = rate::open_store(&log)?;
    let seed = rate::blind_seed(ctx);
    // Specialists s1, s2 and reader r1 track a latent quality; r2 answers at random.
    let mut ts = 0u64;
    for case in &cases {
        let ai_a = blind_pair(case, seed).ai_is_report_a;
        let latent: usize = rng.random_range(0..5);
        for reader in ["s1", "s2", "r1", "r2"] {
            let verdict = if rng.random_bool(0.03) {
                Verdict::X
            } else if reader == "r2" {
                verdict_for(rng.random_range(0..5), ai_a)
            } else {
                let jitter: i64 = if rng.random_bool(0.2) { rng.random_range(-1..=1) } else { 0 };
                verdict_for((latent as i64 + jitter).clamp(0, 4) as usize, ai_a)
            };
            ts += 1;
            store.submit(RubricRating {
                case_id: case.case_id.clone(),
                reader_id: reader.into(),
                verdict,
                comment: String::new(),
                ai_is_report_a: ai_a,
                timestamp_ms: ts,
            })?;
        }
    }
    store.sync()?;
    drop(store);
    rate::report(
        ctx,
        &rate::ReportArgs {
            cases: dir.join("cases.jsonl"),
            log,
            specialists: Some("s1,s2".into()),
            threshold: None,
            out: dir.join("report.json"),
        },
    )
}

fn imaging_stage(ctx: &Ctx, out: &Path) -> CmdResult {
    let raw = out.join("dicom");
    ingest::synth(ctx, &raw, 3)?;
    let n = ingest::ingest_2d(
        ctx,
        &ingest::TwoDArgs {
            input: raw.join("xray"),
            out: out.join("xray"),
            target_size: Some(64),
            frontal_only: false,
            headerless: false,
        },
    )?;
    let v = ingest::ingest_ct(
        ctx,
        &ingest::CtArgs {
            input: raw.join("ct"),
            out: out.join("ct"),
            headerless: false,
        },
    )?;
    let s = ingest::ingest_window(
        ctx,
        &ingest::WindowArgs {
            input: raw.join("ct"),
            out: out.join("ct_slices"),
            window: None,
            target_size: Some(32),
            headerless: false,
        },
    )?;
    if n == 0 || v == 0 || s == 0 {
        return Err(domain(format!("imaging stage wrote {n} radiographs, {v} volumes, {s} slices")));
    }
    Ok(())
}

fn prs_stage(ctx: &Ctx, out: &Path) -> CmdResult {
    let input = out.join("prs_input");
    featurize::synth(ctx, &input, 40, 50)?;
    featurize::prs(
        ctx,
        &featurize::PrsArgs {
            scores: input.join("scores.tsv"),
            demographics: Some(input.join("demographics.csv")),
            thresholds: "p1e-8,p1e-5,p1e-2".into(),
            train_ids: Some(input.join("train_ids.txt")),
            out: out.join("prs"),
        },
    )?;
    featurize::sample(
        ctx,
        &featurize::SampleArgs {
            labels: input.join("labels.csv"),
            cases: 5,
            controls: 5,
            out: out.join("prs").join("sample.jsonl"),
        },
    )
}

fn split_stage(ctx: &Ctx, out: &Path, budget: u64) -> CmdResult {
    let dir = out.join("split");
    split::synth(ctx, &dir.join("items.jsonl"), 0.3)?;
    split::balance(
        ctx,
        &split::BalanceArgs {
            items: dir.join("items.jsonl"),
            out: dir.join("balanced"),
            budget: Some(budget),
            restarts: Some(2),
            targets: None,
            ignore_legacy: false,
        },
    )?;
    split::random(
        ctx,
        &split::RandomArgs {
            items: dir.join("items.jsonl"),
            fractions: "0.7,0.15,0.15".into(),
            out: dir.join("random"),
        },
    )?;
    split::check(&split::CheckArgs {
        assignment: dir.join("balanced").join("manifest.jsonl"),
        items: dir.join("items.jsonl"),
    })
}

fn probe_stage(ctx: &Ctx, out: &Path, replicates: usize) -> CmdResult {
    let input = out.join("probe_input");
    let dir = out.join("probe");
    probe::synth(ctx, &input, 120, 8)?;
    let data = || probe::DataArgs {
        embeddings: input.join("embeddings.csv"),
        sidecar: None,
        labels: input.join("labels.csv"),
        classes: Some("negative,positive".into()),
    };
    probe::select(
        ctx,
        &probe::SelectArgs {
            data: data(),
            lambda_grid: None,
            train_split: "train".into(),
            val_split: "validation".into(),
            out: dir.join("selection.json"),
        },
    )?;
    let selection: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("selection.json"))?)?;
    let lambda = selection["lambda"].as_f64().ok_or_else(|| domain("selection has no lambda"))?;
    probe::train(
        ctx,
        &probe::TrainArgs {
            data: data(),
            lambda,
            split: Some("train".into()),
            out: dir.join("logreg.json"),
        },
    )?;
    probe::lars(
        ctx,
        &probe::LarsArgs {
            data: data(),
            text_init: input.join("text_init.csv"),
            split: Some("train".into()),
            lr: None,
            batch: Some(32),
            epochs: Some(30),
            out: dir.join("lars.json"),
        },
    )?;
    for model in ["logreg", "lars"] {
        probe::eval(
            ctx,
            &probe::EvalArgs {
                data: data(),
                model: dir.join(format!("{model}.json")),
                split: Some("test".into()),
                replicates: Some(replicates),
                out: dir.join(format!("{model}_eval.json")),
            },
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct StageRecord {
    stage: &'static str,
    files: Vec<FileDigest>,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    bytes: u64,
    sha256: String,
}

fn digests(root: &Path, dir: &Path) -> CmdResult<Vec<FileDigest>> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p)?;
            let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            Ok(FileDigest {
                path: rel_path(&p, root),
                bytes: bytes.len() as u64,
                sha256,
            })
        })
        .collect()
}

pub fn demo(ctx: &Ctx, a: &DemoArgs) -> CmdResult {
    let out = &a.out;
    std::fs::create_dir_all(out)?;
    type Stage<'a> = (&'static str, &'a [&'a str], Box<dyn Fn() -> CmdResult + 'a>);
    let stages: Vec<Stage<'_>> = vec![
        ("imaging", &["dicom", "xray", "ct", "ct_slices"], Box::new(|| imaging_stage(ctx, out))),
        ("prs", &["prs_input", "prs"], Box::new(|| prs_stage(ctx, out))),
        ("split", &["split"], Box::new(|| split_stage(ctx, out, a.split_budget))),
        ("probe", &["probe_input", "probe"], Box::new(|| probe_stage(ctx, out, a.replicates))),
        ("text", &["text"], Box::new(|| text_stage(ctx, out))),
        ("rating", &["rating"], Box::new(|| rating_stage(ctx, out))),
    ];
    let mut m = ctx.manifest(&out.join("pipeline.jsonl"))?;
    for (name, dirs, body) in stages {
        log::info!("stage {name}");
        body()?;
        let mut files = Vec::new();
        for d in dirs {
            files.extend(digests(out, &out.join(d))?);
        }
        m.write("pipeline_stage", &StageRecord { stage: name, files })?;
    }
    m.finish()?;
    Ok(())
}
