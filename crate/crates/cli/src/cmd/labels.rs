//! `labels flag|prompt|adjudicate`

use crate::{domain, manifest, usage, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::rater::adjudicate::review_counts;
use medeval_core::rater::labels::Flag;
use medeval_core::rater::{adjudicate, build_revision_prompt, fleiss_kappa, flag_reports, FindingCatalog, LabelReview, PromptStyle};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum LabelsCmd {
    /// Flag reports that mention a finding's keywords.
    Flag(FlagArgs),
    /// Emit revision prompts for an external language model.
    Prompt(PromptArgs),
    /// Resolve three-reviewer label verdicts and report Fleiss' kappa.
    Adjudicate(AdjudicateArgs),
}

#[derive(Debug, Args)]
pub struct FlagArgs {
    /// JSONL of `{report_id, text}`.
    #[arg(long)]
    pub reports: PathBuf,
    /// Finding catalog JSON; defaults to the built-in 13 findings.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, default_value = "bot")]
    pub style: String,
    /// Single report text; the prompt is written verbatim to --out or stdout.
    #[arg(long, conflicts_with = "reports")]
    pub text: Option<String>,
    /// Finding name, required with --text or when no --flags are given.
    #[arg(long)]
    pub finding: Option<String>,
    /// JSONL of `{report_id, text}` for batch prompts.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Flag manifest from `labels flag`; one prompt per flag.
    #[arg(long, requires = "reports")]
    pub flags: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    /// JSONL of `{report_id, finding, reviewers: [3 verdicts], senior}`.
    #[arg(long)]
    pub reviews: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportText {
    pub report_id: String,
    pub text: String,
}

pub fn run(ctx: &Ctx, cmd: LabelsCmd) -> CmdResult {
    match cmd {
        LabelsCmd::Flag(a) => flag(ctx, &a),
        LabelsCmd::Prompt(a) => prompt(ctx, &a),
        LabelsCmd::Adjudicate(a) => adjudicate_cmd(ctx, &a),
    }
}

fn catalog(path: Option<&Path>) -> CmdResult<FindingCatalog> {
    match path {
        Some(p) => Ok(FindingCatalog::from_json(&std::fs::read_to_string(p)?)?),
        None => Ok(FindingCatalog::builtin()),
    }
}

pub fn read_reports(path: &Path) -> CmdResult<Vec<(String, String)>> {
    let reports: Vec<ReportText> = manifest::read_payloads(path, "report_text")?;
    Ok(reports.into_iter().map(|r| (r.report_id, r.text)).collect())
}

pub fn flag(ctx: &Ctx, a: &FlagArgs) -> CmdResult {
    let reports = read_reports(&a.reports)?;
    let flags = flag_reports(&reports, &catalog(a.catalog.as_deref())?);
    let mut m = ctx.manifest(&a.out)?;
    for f in &flags {
        m.write("label_flag", f)?;
    }
    m.finish()?;
    log::info!("{} flags over {} reports", flags.len(), reports.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct PromptRecord<'a> {
    report_id: &'a str,
    finding: &'a str,
    style: PromptStyle,
    prompt: String,
}

pub fn prompt(ctx: &Ctx, a: &PromptArgs) -> CmdResult {
    let style: PromptStyle = a.style.parse().map_err(|e: medeval_core::rater::RaterError| usage(e.to_string()))?;
    let cat = catalog(a.catalog.as_deref())?;
    if let Some(text) = &a.text {
        let finding = a.finding.as_deref().ok_or_else(|| usage("--text needs --finding"))?;
        let prompt = build_revision_prompt(text, finding, style, &cat)?;
        match &a.out {
            Some(p) => {
                crate::ensure_parent(p)?;
                std::fs::write(p, prompt)?;
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(prompt.as_bytes())?;
                out.flush()?;
            }
        }
        return Ok(());
    }
    let reports_path = a.reports.as_deref().ok_or_else(|| usage("give --text or --reports"))?;
    let out = a.out.as_deref().ok_or_else(|| usage("--reports needs --out"))?;
    let reports = read_reports(reports_path)?;
    let pairs: Vec<(String, String)> = match (&a.flags, &a.finding) {
        (Some(flags), _) => {
            let flags: Vec<Flag> = manifest::read_payloads(flags, "label_flag")?;
            flags.into_iter().map(|f| (f.report_id, f.finding)).collect()
        }
        (None, Some(finding)) => reports.iter().map(|(id, _)| (id.clone(), finding.clone())).collect(),
        (None, None) => return Err(usage("batch prompts need --flags or --finding")),
    };
    let mut m = ctx.manifest(out)?;
    for (report_id, finding) in &pairs {
        let text = reports
            .iter()
            .find(|(id, _)| id == report_id)
            .map(|(_, t)| t)
            .ok_or_else(|| domain(format!("flag names unknown report {report_id}")))?;
        m.write(
            "revision_prompt",
            &PromptRecord {
                report_id,
                finding,
                style,
                prompt: build_revision_prompt(text, finding, style, &cat)?,
            },
        )?;
    }
    m.finish()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AdjudicationRecord<'a> {
    report_id: &'a str,
    finding: &'a str,
    #[serde(flatten)]
    result: medeval_core::rater::Adjudication,
}

#[derive(Debug, Serialize)]
struct AgreementSummary {
    reviews: usize,
    unanimous: usize,
    majority: usize,
    senior: usize,
    fleiss_kappa: Option<f64>,
}

pub fn adjudicate_cmd(ctx: &Ctx, a: &AdjudicateArgs) -> CmdResult {
    let reviews: Vec<LabelReview> = manifest::read_payloads(&a.reviews, "label_review")?;
    let mut m = ctx.manifest(&a.out)?;
    let mut counts = [0usize; 3];
    for r in &reviews {
        let result = adjudicate(r)?;
        counts[result.provenance as usize] += 1;
        m.write(
            "adjudication",
            &AdjudicationRecord {
                report_id: &r.report_id,
                finding: &r.finding,
                result,
            },
        )?;
    }
    let fleiss = match fleiss_kappa(&review_counts(&reviews)) {
        Ok(f) => Some(f.kappa),
        Err(e) => {
            log::warn!("Fleiss' kappa undefined: {e}");
            None
        }
    };
    m.write(
        "agreement_summary",
        &AgreementSummary {
            reviews: reviews.len(),
            unanimous: counts[0],
            majority: counts[1],
            senior: counts[2],
            fleiss_kappa: fleiss,
        },
    )?;
    m.finish()?;
    Ok(())
}
