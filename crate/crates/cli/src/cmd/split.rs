//! `split balance|random|check|synth`

use crate::cmd::parse_f64_list;
use crate::manifest::{self, ManifestWriter};
use crate::{domain, usage, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::split::synthetic::vqa_shaped_corpus;
use medeval_core::split::{
    balance_split, check_contamination, patient_random_split, split_report, validate_items, BalanceObjective,
    Constraints, ContaminationReport, QaItem, Split, SplitAssignment,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum SplitCmd {
    /// Reassign images to train/validation/test to balance answer types and question types.
    Balance(BalanceArgs),
    /// Seeded patient-level random split.
    Random(RandomArgs),
    /// Check an assignment for images or patients in more than one split. Exits 1 on leakage.
    Check(CheckArgs),
    /// Write a synthetic VQA-shaped item corpus.
    Synth(SplitSynthArgs),
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// JSONL of items (bare or as a manifest of `qa_item` records).
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// JSON objective with weights, per-region ratio targets and size targets.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Let former validation/test images move into train.
    #[arg(long)]
    pub ignore_legacy: bool,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub fractions: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Assignment JSON (as written by `split balance`) or a manifest of `split_assignment` records.
    pub assignment: PathBuf,
    pub items: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of images carrying a legacy validation/test label.
    #[arg(long, default_value_t = 0.3)]
    pub legacy_fraction: f64,
}

pub fn run(ctx: &Ctx, cmd: SplitCmd) -> CmdResult {
    match cmd {
        SplitCmd::Balance(a) => balance(ctx, &a),
        SplitCmd::Random(a) => random(ctx, &a),
        SplitCmd::Check(a) => check(&a),
        SplitCmd::Synth(a) => synth(ctx, &a.out, a.legacy_fraction),
    }
}

pub fn read_items(path: &Path) -> CmdResult<Vec<QaItem>> {
    let items: Vec<QaItem> = manifest::read_payloads(path, "qa_item")?;
    validate_items(&items)?;
    Ok(items)
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRecord {
    image_id: String,
    split: Split,
}

#[derive(Debug, Serialize)]
struct AssignmentFile<'a, E: Serialize> {
    method: &'a str,
    #[serde(flatten)]
    extra: E,
    assignment: &'a SplitAssignment,
}

fn write_outputs<E: Serialize>(
    ctx: &Ctx,
    out: &Path,
    method: &str,
    extra: E,
    summary: &impl Serialize,
    assignment: &SplitAssignment,
    items: &[QaItem],
) -> CmdResult {
    ctx.write_json(&out.join("assignment.json"), &AssignmentFile { method, extra, assignment })?;
    let report = split_report(assignment, items)?;
    ctx.write_csv(&out.join("ratio.csv"), &report.ratio_csv())?;
    ctx.write_csv(&out.join("qtype.csv"), &report.qtype_csv())?;
    let mut m: ManifestWriter<_> = ctx.manifest(&out.join("manifest.jsonl"))?;
    for (image_id, &split) in assignment {
        m.write("split_assignment", &AssignmentRecord { image_id: image_id.clone(), split })?;
    }
    m.write("split_summary", summary)?;
    m.finish()?;
    Ok(())
}

fn objective(ctx: &Ctx, targets: Option<&Path>) -> CmdResult<BalanceObjective> {
    match targets {
        Some(p) => Ok(serde_json::from_slice(&std::fs::read(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?),
        None => Ok(BalanceObjective {
            w_ratio: ctx.config.split.w_ratio,
            w_qtype: ctx.config.split.w_qtype,
            w_size: ctx.config.split.w_size,
            ..BalanceObjective::default()
        }),
    }
}

#[derive(Debug, Serialize)]
struct BalanceSummary {
    method: &'static str,
    images: usize,
    items: usize,
    objective: f64,
    ratio_term: f64,
    qtype_term: f64,
    size_term: f64,
    restart: usize,
    restart_seed: u64,
    contamination_free: bool,
}

pub fn balance(ctx: &Ctx, a: &BalanceArgs) -> CmdResult {
    let items = read_items(&a.items)?;
    let objective = objective(ctx, a.targets.as_deref())?;
    let constraints = Constraints {
        legacy: !a.ignore_legacy,
        group_patients: ctx.config.split.group_patients,
    };
    let budget = a.budget.unwrap_or(ctx.config.split.budget);
    let restarts = a.restarts.unwrap_or(ctx.config.split.restarts);
    let seed = medeval_core::seed::derive_seed(ctx.seed(), "split_balance");
    let result = balance_split(&items, &objective, constraints, seed, budget, restarts)?;
    let clean = check_contamination(&result.assignment, &items).is_clean();
    log::info!("objective {:.6} after {budget} proposals x {restarts} restarts", result.terms.total);
    ctx.write_json(&a.out.join("trace.json"), &serde_json::json!({ "trace": result.trace }))?;
    let summary = BalanceSummary {
        method: "balance",
        images: result.assignment.len(),
        items: items.len(),
        objective: result.terms.total,
        ratio_term: result.terms.ratio,
        qtype_term: result.terms.qtype,
        size_term: result.terms.size,
        restart: result.restart,
        restart_seed: result.restart_seed,
        contamination_free: clean,
    };
    write_outputs(
        ctx,
        &a.out,
        "balance",
        serde_json::json!({ "objective": result.terms, "restart_seed": result.restart_seed }),
        &summary,
        &result.assignment,
        &items,
    )?;
    if !clean {
        return Err(domain("balanced assignment is contaminated"));
    }
    Ok(())
}

pub fn random(ctx: &Ctx, a: &RandomArgs) -> CmdResult {
    let fractions = parse_f64_list(&a.fractions)?;
    let items = read_items(&a.items)?;
    // Images without a patient id are their own group.
    let group_of = |it: &QaItem| it.patient_id.clone().unwrap_or_else(|| format!("image:{}", it.image_id));
    let groups: Vec<String> = items.iter().map(group_of).collect();
    let seed = medeval_core::seed::derive_seed(ctx.seed(), "split_random");
    let by_group = patient_random_split(&groups, &fractions, seed)?;
    let assignment: SplitAssignment = items.iter().map(|it| (it.image_id.clone(), by_group[&group_of(it)])).collect();
    let summary = serde_json::json!({ "method": "random", "fractions": fractions, "images": assignment.len(), "groups": by_group.len() });
    write_outputs(
        ctx,
        &a.out,
        "random",
        serde_json::json!({ "fractions": fractions }),
        &summary,
        &assignment,
        &items,
    )
}

/// Accepts `{"assignment": {...}}`, a bare `{image_id: split}` map, or a manifest.
pub fn read_assignment(path: &Path) -> CmdResult<SplitAssignment> {
    let text = std::fs::read_to_string(path)?;
    if let Some(value) = serde_json::from_str::<serde_json::Value>(&text).ok().filter(|v| v.get("schema_version").is_none()) {
        let map = value.get("assignment").cloned().unwrap_or(value);
        return serde_json::from_value(map).map_err(|e| domain(format!("{}: {e}", path.display())));
    }
    let records: Vec<AssignmentRecord> = manifest::read_payloads(path, "split_assignment")?;
    Ok(records.into_iter().map(|r| (r.image_id, r.split)).collect())
}

pub fn describe(report: &ContaminationReport) -> String {
    let mut out = String::new();
    let list = |m: &BTreeMap<String, std::collections::BTreeSet<Split>>, kind: &str, out: &mut String| {
        for (id, splits) in m {
            let names: Vec<&str> = splits.iter().map(|s| s.name()).collect();
            out.push_str(&format!("{kind} {id} in {}\n", names.join(", ")));
        }
    };
    list(&report.images, "image", &mut out);
    list(&report.patients, "patient", &mut out);
    out
}

pub fn check(a: &CheckArgs) -> CmdResult {
    let assignment = read_assignment(&a.assignment)?;
    let items = read_items(&a.items)?;
    let missing = items.iter().filter(|it| !assignment.contains_key(&it.image_id)).count();
    if missing > 0 {
        log::warn!("{missing} items have no assigned image and were not checked");
    }
    let report = check_contamination(&assignment, &items);
    if report.is_clean() {
        println!("clean: {} images, {} items", assignment.len(), items.len());
        return Ok(());
    }
    print!("{}", describe(&report));
    Err(domain(format!(
        "contamination: {} images and {} patients in more than one split",
        report.images.len(),
        report.patients.len()
    )))
}

pub fn synth(ctx: &Ctx, out: &Path, legacy_fraction: f64) -> CmdResult {
    if !(0.0..=1.0).contains(&legacy_fraction) {
        return Err(usage("--legacy-fraction must be in [0, 1]"));
    }
    let items = vqa_shaped_corpus(medeval_core::seed::derive_seed(ctx.seed(), "split_synth"), legacy_fraction);
    let mut m = ctx.manifest(out)?;
    for it in &items {
        m.write("qa_item", it)?;
    }
    m.finish()?;
    Ok(())
}
