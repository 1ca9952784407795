//! `rate serve|report`

use crate::cmd::parse_str_list;
use crate::server::{self, AppState, ServeError};
use crate::{domain, manifest, usage, CliError, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::rater::{
    aggregate_rubric, eliminate_readers, mean_kappas, CaseRecord, RaterError, RatingStore, RubricRating,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Subcommand)]
pub enum RateCmd {
    /// Serve the blinded rating API (and static UI assets if configured).
    Serve(ServeArgs),
    /// Reader agreement, elimination and rubric percentages from a rating log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSONL of cases `{case_id, dataset, status, report_ai, report_original, image_refs}`.
    #[arg(long)]
    pub cases: PathBuf,
    /// Append-only rating event log; created if missing.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Directory of static UI assets.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Snapshot path; defaults to the log path with `.snapshot.json`.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Comma-separated specialist reader ids; defaults to `rate.specialists`.
    #[arg(long)]
    pub specialists: Option<String>,
    /// Readers with mean kappa strictly below this are dropped; defaults to `rate.threshold`.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(ctx: &Ctx, cmd: RateCmd) -> CmdResult {
    match cmd {
        RateCmd::Serve(a) => serve(ctx, &a),
        RateCmd::Report(a) => report(ctx, &a),
    }
}

pub fn read_cases(path: &Path) -> CmdResult<Vec<CaseRecord>> {
    let cases: Vec<CaseRecord> = manifest::read_payloads(path, "rating_case")?;
    if cases.is_empty() {
        return Err(domain(format!("{} has no cases", path.display())));
    }
    Ok(cases)
}

/// Seed for the per-case left/right coin flips.
pub fn blind_seed(ctx: &Ctx) -> u64 {
    medeval_core::seed::derive_seed(ctx.seed(), "rating_blind")
}

fn corrupt_log_help(path: &Path, err: &RaterError) -> CliError {
    let line = match err {
        RaterError::CorruptEventLog { line, .. } => *line,
        _ => 0,
    };
    domain(format!(
        "{err}\nThe event log {p} is damaged before its last line, so it cannot be replayed safely.\n\
         To recover: copy the log aside, keep lines 1..{keep} (e.g. `head -n {keep} {p} > {p}.fixed`), \
         inspect the dropped lines, then move the fixed file into place and restart.",
        p = path.display(),
        keep = line.saturating_sub(1),
    ))
}

pub fn open_store(path: &Path) -> CmdResult<RatingStore> {
    crate::ensure_parent(path)?;
    match RatingStore::open(path) {
        Ok(store) => {
            if store.recovered_bytes() > 0 {
                log::warn!(
                    "dropped a {}-byte partial record at the end of {}",
                    store.recovered_bytes(),
                    path.display()
                );
            }
            Ok(store)
        }
        Err(e @ RaterError::CorruptEventLog { .. }) => Err(corrupt_log_help(path, &e)),
        Err(e) => Err(e.into()),
    }
}

pub fn serve(ctx: &Ctx, a: &ServeArgs) -> CmdResult {
    let cases = read_cases(&a.cases)?;
    let store = open_store(&a.log)?;
    let snapshot = a.snapshot.clone().unwrap_or_else(|| a.log.with_extension("snapshot.json"));
    let sc = &ctx.config.server;
    let state = AppState::new(cases, store, blind_seed(ctx))?
        .with_tokens(sc.tokens.clone())
        .with_snapshots(snapshot, sc.snapshot_every);
    let host = a.host.clone().unwrap_or_else(|| sc.host.clone());
    let port = a.port.unwrap_or(sc.port);
    let ui_dir = a.ui_dir.clone().or_else(|| (!sc.ui_dir.is_empty()).then(|| PathBuf::from(&sc.ui_dir)));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime
        .block_on(async {
            let listener = server::bind(&host, port).await?;
            log::info!("rating server on http://{}", listener.local_addr()?);
            server::serve(listener, Arc::new(state), ui_dir, server::shutdown_signal()).await
        })
        .map_err(|e| match e {
            ServeError::PortInUse { .. } => domain(e.to_string()),
            other => domain(other.to_string()),
        })
}

#[derive(Debug, Serialize)]
pub struct RatingReport {
    pub ratings: usize,
    pub threshold: f64,
    pub specialists: BTreeSet<String>,
    pub agreement: BTreeMap<String, medeval_core::rater::aggregate::ReaderAgreement>,
    pub elimination: medeval_core::rater::aggregate::Elimination,
    pub summary: medeval_core::rater::RubricSummary,
}

pub fn build_report(
    ratings: &[RubricRating],
    cases: &[CaseRecord],
    specialists: BTreeSet<String>,
    threshold: f64,
) -> Result<RatingReport, RaterError> {
    let agreement = mean_kappas(ratings, &specialists);
    let means: BTreeMap<String, Option<f64>> = agreement.iter().map(|(r, a)| (r.clone(), a.mean)).collect();
    let elimination = eliminate_readers(&means, &specialists, threshold)?;
    let by_id: BTreeMap<String, CaseRecord> = cases.iter().map(|c| (c.case_id.clone(), c.clone())).collect();
    let summary = aggregate_rubric(ratings, &by_id, &elimination.retained)?;
    Ok(RatingReport {
        ratings: ratings.len(),
        threshold,
        specialists,
        agreement,
        elimination,
        summary,
    })
}

pub fn report(ctx: &Ctx, a: &ReportArgs) -> CmdResult {
    let cases = read_cases(&a.cases)?;
    let store = RatingStore::read_only(&a.log).map_err(|e| match e {
        RaterError::CorruptEventLog { .. } => corrupt_log_help(&a.log, &e),
        other => other.into(),
    })?;
    let specialists: BTreeSet<String> = match &a.specialists {
        Some(s) => parse_str_list(s).into_iter().collect(),
        None => ctx.config.rate.specialists.iter().cloned().collect(),
    };
    if specialists.is_empty() {
        return Err(usage("give --specialists or set rate.specialists"));
    }
    let threshold = a.threshold.unwrap_or(ctx.config.rate.threshold);
    let report = build_report(&store.snapshot(), &cases, specialists, threshold)?;
    if let Some(all) = report.summary.groups.get(&medeval_core::rater::aggregate::Group::All) {
        log::info!(
            "{} ratings kept; superior or similar {:?}%, clinically acceptable {:?}%",
            all.total,
            all.superior_or_similar,
            all.clinically_acceptable
        );
    }
    ctx.write_json(&a.out, &report)
}
