//! `metrics run|radgraph-export|radgraph-ingest`

use crate::{manifest, usage, CmdResult, Ctx};
use clap::{Args, Subcommand, ValueEnum};
use medeval_core::text::report::{
    ingest_radgraph, read_examples, run_metrics, write_radgraph_exchange, write_scores_jsonl, Example, Metric,
};
use medeval_core::text::{extract_sections, NormalizeOptions};
use std::io::BufReader;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Score predictions against references.
    Run(RunArgs),
    /// Write lowercased prediction/reference pairs for an external RadGraph scorer.
    RadgraphExport(ExportArgs),
    /// Read the external scorer's `{id, score}` lines into a metric report.
    RadgraphIngest(IngestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SectionChoice {
    Full,
    Findings,
    Impression,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSONL of `{id, prediction, references}`.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated subset of bleu4,rougeL,cider,tokf1,em; defaults to `metrics.set`.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Score only this report section of predictions and references.
    #[arg(long, value_enum, default_value_t = SectionChoice::Full)]
    pub section: SectionChoice,
    /// Manifest of `metric_report` records.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional manifest with one `example_scores` record per example.
    #[arg(long)]
    pub per_example: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(ctx: &Ctx, cmd: MetricsCmd) -> CmdResult {
    match cmd {
        MetricsCmd::Run(a) => run_scores(ctx, &a),
        MetricsCmd::RadgraphExport(a) => {
            let examples = load(&a.input)?;
            crate::ensure_parent(&a.out)?;
            let n = write_radgraph_exchange(std::io::BufWriter::new(std::fs::File::create(&a.out)?), &examples)?;
            log::info!("wrote {n} pairs");
            Ok(())
        }
        MetricsCmd::RadgraphIngest(a) => {
            let report = ingest_radgraph(BufReader::new(std::fs::File::open(&a.input)?))?;
            let mut m = ctx.manifest(&a.out)?;
            m.write("metric_report", &report)?;
            m.finish()?;
            Ok(())
        }
    }
}

pub fn load(path: &Path) -> CmdResult<Vec<Example>> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next().is_some_and(|l| l.contains("\"schema_version\"")) {
        return Ok(manifest::read_payloads(path, "text_example")?);
    }
    Ok(read_examples(text.as_bytes())?)
}

pub fn normalize_options(ctx: &Ctx) -> NormalizeOptions {
    NormalizeOptions {
        remove_articles: ctx.config.metrics.normalize == "no-articles",
    }
}

fn section_of(text: &str, section: SectionChoice) -> String {
    let s = extract_sections(text);
    match section {
        SectionChoice::Full => text.to_string(),
        SectionChoice::Findings => s.findings.unwrap_or_default(),
        SectionChoice::Impression => s.impression.unwrap_or_default(),
    }
}

pub fn run_scores(ctx: &Ctx, a: &RunArgs) -> CmdResult {
    let metrics = Metric::parse_set(a.metrics.as_deref().unwrap_or(&ctx.config.metrics.set))
        .map_err(|e| usage(e.to_string()))?;
    let mut examples = load(&a.input)?;
    if a.section != SectionChoice::Full {
        for ex in &mut examples {
            ex.prediction = section_of(&ex.prediction, a.section);
            ex.references = ex.references.iter().map(|r| section_of(r, a.section)).collect();
        }
    }
    let reports = run_metrics(&examples, &metrics, normalize_options(ctx))?;
    let mut m = ctx.manifest(&a.out)?;
    for r in &reports {
        log::info!("{} = {:.4}", r.metric, r.aggregate);
        m.write("metric_report", r)?;
    }
    m.finish()?;
    if let Some(path) = &a.per_example {
        let mut rows = Vec::new();
        write_scores_jsonl(&mut rows, &reports)?;
        let mut m = ctx.manifest(path)?;
        for line in rows.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            m.write("example_scores", &serde_json::from_slice::<serde_json::Value>(line)?)?;
        }
        m.finish()?;
    }
    Ok(())
}
