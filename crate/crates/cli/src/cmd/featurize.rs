//! `featurize prs|sample|synth`

use crate::cmd::parse_str_list;
use crate::{domain, rel_path, usage, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::imaging::io::encode_png_rgb8;
use medeval_core::prs::load::{delimiter_for, read_demographics, read_scores};
use medeval_core::prs::{balanced_case_control, fit_norm, render_genomic_image, Demographics, CHANNELS};
use medeval_core::seed::stage_rng;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum FeaturizeCmd {
    /// Render one RGB block image per individual from long-format PRS scores.
    Prs(PrsArgs),
    /// Seeded balanced case/control sample from a labels CSV.
    Sample(SampleArgs),
    /// Write a synthetic score table, demographics, labels and training ids.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrsArgs {
    /// CSV or TSV with individual_id, trait_id, threshold_id, score.
    #[arg(long)]
    pub scores: PathBuf,
    /// CSV with individual_id, age, sex, bmi.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// The three p-value threshold ids, mapped to R, G, B.
    #[arg(long)]
    pub thresholds: String,
    /// One individual id per line; normalization is fit on these only. Defaults to everyone.
    #[arg(long)]
    pub train_ids: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// CSV with individual_id,label where label is 0/1 or false/true.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub cases: usize,
    #[arg(long)]
    pub controls: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub individuals: usize,
    #[arg(long, default_value_t = 50)]
    pub traits: usize,
}

pub fn run(ctx: &Ctx, cmd: FeaturizeCmd) -> CmdResult {
    match cmd {
        FeaturizeCmd::Prs(a) => prs(ctx, &a).map(|_| ()),
        FeaturizeCmd::Sample(a) => sample(ctx, &a),
        FeaturizeCmd::Synth(a) => synth(ctx, &a.out, a.individuals, a.traits),
    }
}

#[derive(Debug, Serialize)]
struct PrsImageRecord {
    individual_id: String,
    image_path: String,
    width: u32,
    height: u32,
    in_training_fit: bool,
    demographics: Option<Demographics>,
}

#[derive(Debug, Serialize)]
struct NormFile<'a> {
    trait_ids: &'a [String],
    thresholds: &'a [String; CHANNELS],
    training_individuals: usize,
    stats: &'a medeval_core::prs::NormStats,
}

fn read_id_lines(path: &Path) -> CmdResult<BTreeSet<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn prs(ctx: &Ctx, a: &PrsArgs) -> CmdResult<usize> {
    let list = parse_str_list(&a.thresholds);
    let thresholds: [String; CHANNELS] = list
        .try_into()
        .map_err(|l: Vec<String>| usage(format!("--thresholds needs exactly 3 ids, got {}", l.len())))?;
    let mut cohort = read_scores(std::fs::File::open(&a.scores)?, delimiter_for(&a.scores), &thresholds)?;
    if let Some(d) = &a.demographics {
        cohort.attach_demographics(&read_demographics(std::fs::File::open(d)?, delimiter_for(d))?);
    }
    let train: Option<BTreeSet<String>> = a.train_ids.as_deref().map(read_id_lines).transpose()?;
    let train_profiles: Vec<_> = cohort
        .profiles
        .iter()
        .filter(|p| train.as_ref().is_none_or(|t| t.contains(&p.individual_id)))
        .cloned()
        .collect();
    if train_profiles.is_empty() {
        return Err(domain("no training individuals found in the score table"));
    }
    let stats = fit_norm(&train_profiles)?;
    ctx.write_json(
        &a.out.join("norm_stats.json"),
        &NormFile {
            trait_ids: &cohort.trait_ids,
            thresholds: &cohort.thresholds,
            training_individuals: train_profiles.len(),
            stats: &stats,
        },
    )?;
    let images = a.out.join("images");
    std::fs::create_dir_all(&images)?;
    let mut profiles: Vec<_> = cohort.profiles.iter().collect();
    profiles.sort_by(|x, y| x.individual_id.cmp(&y.individual_id));
    let mut manifest = ctx.manifest(&a.out.join("manifest.jsonl"))?;
    let text = ctx.png_text();
    for p in &profiles {
        let img = render_genomic_image(p, &stats)?;
        let path = images.join(format!("{}.png", p.individual_id.replace(['/', '\\'], "_")));
        std::fs::write(&path, encode_png_rgb8(img.width, img.height, &img.bytes, &text)?)?;
        manifest.write(
            "prs_image",
            &PrsImageRecord {
                individual_id: p.individual_id.clone(),
                image_path: rel_path(&path, &a.out),
                width: img.width,
                height: img.height,
                in_training_fit: train.as_ref().is_none_or(|t| t.contains(&p.individual_id)),
                demographics: p.demographics,
            },
        )?;
    }
    manifest.finish()?;
    log::info!("rendered {} images of {} traits", profiles.len(), cohort.trait_ids.len());
    Ok(profiles.len())
}

#[derive(Debug, Serialize)]
struct SampleRecord<'a> {
    individual_id: &'a str,
    case: bool,
}

fn parse_label(s: &str) -> CmdResult<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "case" => Ok(true),
        "0" | "false" | "control" => Ok(false),
        other => Err(domain(format!("label `{other}` is not 0/1"))),
    }
}

pub fn sample(ctx: &Ctx, a: &SampleArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.labels)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("individual_id")) {
            continue;
        }
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| domain(format!("{}:{}: expected individual_id,label", a.labels.display(), i + 1)))?;
        ids.push(id.trim().to_string());
        labels.push(parse_label(label)?);
    }
    let seed = medeval_core::seed::derive_seed(ctx.seed(), "featurize_sample");
    let chosen = balanced_case_control(&labels, a.cases, a.controls, seed)?;
    let mut manifest = ctx.manifest(&a.out)?;
    for i in chosen {
        manifest.write("sample_member", &SampleRecord { individual_id: &ids[i], case: labels[i] })?;
    }
    manifest.finish()?;
    Ok(())
}

/// Scores for `n` individuals over `t` traits at three thresholds, with a
/// binary outcome tied to the first few traits so images carry signal.
pub fn synth(ctx: &Ctx, out: &Path, n: usize, t: usize) -> CmdResult {
    let mut rng = stage_rng(ctx.seed(), "featurize_synth");
    std::fs::create_dir_all(out)?;
    let thresholds = ["p1e-8", "p1e-5", "p1e-2"];
    let mut scores = String::from("individual_id\ttrait_id\tthreshold_id\tscore\n");
    let mut demo = String::from("individual_id,age,sex,bmi\n");
    let mut labels = String::from("individual_id,label\n");
    let mut train = String::new();
    for i in 0..n {
        let id = format!("ind{i:04}");
        let mut risk = 0.0;
        for k in 0..t {
            let base: f64 = rng.random_range(-2.0..2.0);
            if k < 3 {
                risk += base;
            }
            for (c, th) in thresholds.iter().enumerate() {
                let noise: f64 = rng.random_range(-0.1..0.1);
                writeln!(scores, "{id}\tT{k:05}\t{th}\t{:.6}", base * (1.0 + c as f64 * 0.5) + noise).unwrap();
            }
        }
        let age: f64 = rng.random_range(40.0..70.0);
        let bmi: f64 = rng.random_range(18.0..35.0);
        let sex = if rng.random_bool(0.5) { "female" } else { "male" };
        writeln!(demo, "{id},{age:.1},{sex},{bmi:.1}").unwrap();
        writeln!(labels, "{id},{}", u8::from(risk > 0.0)).unwrap();
        if i % 5 != 0 {
            writeln!(train, "{id}").unwrap();
        }
    }
    std::fs::write(out.join("scores.tsv"), scores)?;
    std::fs::write(out.join("demographics.csv"), demo)?;
    std::fs::write(out.join("labels.csv"), labels)?;
    std::fs::write(out.join("train_ids.txt"), train)?;
    Ok(())
}
