//! `ingest 2d|ct|window|synth`

use crate::{rel_path, usage, CmdResult, Ctx};
use clap::{Args, Subcommand};
use medeval_core::imaging::dicom::DicomObject;
use medeval_core::imaging::fixtures::{chest_xray_builder, ct_slice_builder};
use medeval_core::imaging::io::{walk_dicom, write_png16, write_volume, StudyTree, VolumeSidecar};
use medeval_core::imaging::volume::TARGET_SPACING;
use medeval_core::imaging::{
    apply_voi, build_volume, is_frontal, parse_window, resize_pad, select_series, window_slice, FloatImage, GrayImage16,
    ParseOptions, ResizeMeta, SeriesSummary, VoiSpec,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum IngestCmd {
    /// Radiographs: VOI transform, resize with padding, 16-bit PNG.
    #[command(name = "2d", alias = "xray")]
    TwoD(TwoDArgs),
    /// CT series: volume assembly and tricubic resampling to 1.4 x 0.7 x 0.7 mm.
    Ct(CtArgs),
    /// CT slices windowed in HU to 16-bit PNG.
    Window(WindowArgs),
    /// Write a small synthetic DICOM tree (radiographs and one CT series).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TwoDArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub target_size: Option<u32>,
    /// Skip images whose view position is not PA or AP.
    #[arg(long)]
    pub frontal_only: bool,
    /// Accept files with no DICOM preamble (implicit VR little endian).
    #[arg(long)]
    pub headerless: bool,
}

#[derive(Debug, Args)]
pub struct CtArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub headerless: bool,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// HU window as LO:HI; defaults to `ingest.window`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long)]
    pub target_size: Option<u32>,
    #[arg(long)]
    pub headerless: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub patients: usize,
}

pub fn run(ctx: &Ctx, cmd: IngestCmd) -> CmdResult {
    match cmd {
        IngestCmd::TwoD(a) => ingest_2d(ctx, &a).map(|_| ()),
        IngestCmd::Ct(a) => ingest_ct(ctx, &a).map(|_| ()),
        IngestCmd::Window(a) => ingest_window(ctx, &a).map(|_| ()),
        IngestCmd::Synth(a) => synth(ctx, &a.out, a.patients),
    }
}

#[derive(Debug, Serialize)]
struct ImageRecord {
    study_uid: String,
    series_uid: String,
    sop_instance_uid: String,
    patient_id: Option<String>,
    view_position: Option<String>,
    frontal: bool,
    source: String,
    image_path: String,
    resize: ResizeMeta,
}

#[derive(Debug, Serialize)]
struct Rejected {
    source: String,
    reason: String,
}

fn options(headerless: bool) -> ParseOptions {
    ParseOptions {
        headerless_implicit: headerless,
    }
}

fn to_gray(img: &FloatImage) -> GrayImage16 {
    GrayImage16 {
        width: img.width,
        height: img.height,
        samples: img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect(),
    }
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

fn instance_name(obj: &DicomObject, path: &Path) -> String {
    obj.sop_instance_uid()
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn write_rejected(
    manifest: &mut crate::manifest::ManifestWriter<impl std::io::Write>,
    tree: &StudyTree,
    input: &Path,
) -> CmdResult {
    for (path, err) in &tree.rejected {
        log::warn!("rejected {}: {err}", path.display());
        manifest.write(
            "rejected_file",
            &Rejected {
                source: rel_path(path, input),
                reason: err.to_string(),
            },
        )?;
    }
    Ok(())
}

/// Returns the number of images written.
pub fn ingest_2d(ctx: &Ctx, a: &TwoDArgs) -> CmdResult<usize> {
    let target = a.target_size.unwrap_or(ctx.config.ingest.target);
    if target == 0 {
        return Err(usage("--target-size must be positive"));
    }
    let tree = walk_dicom(&a.input, options(a.headerless))?;
    let mut manifest = ctx.manifest(&a.out.join("manifest.jsonl"))?;
    let text = ctx.png_text();
    let mut written = 0;
    for (study, series) in &tree.studies {
        for (series_uid, files) in series {
            for file in files {
                let view = file.object.view_position();
                let frontal = view.as_deref().is_some_and(is_frontal);
                if a.frontal_only && !frontal {
                    continue;
                }
                let source = rel_path(&file.path, &a.input);
                let gray = match apply_voi(&file.object, &VoiSpec::from_object(&file.object)) {
                    Ok(g) => g,
                    Err(e) => {
                        log::warn!("skipping {source}: {e}");
                        manifest.write("rejected_file", &Rejected { source, reason: e.to_string() })?;
                        continue;
                    }
                };
                let (padded, meta) = resize_pad(&FloatImage::from(&gray), target);
                let image_path = a
                    .out
                    .join("images")
                    .join(safe_name(study))
                    .join(format!("{}.png", safe_name(&instance_name(&file.object, &file.path))));
                crate::ensure_parent(&image_path)?;
                write_png16(&image_path, &to_gray(&padded), &text)?;
                manifest.write(
                    "xray_image",
                    &ImageRecord {
                        study_uid: study.clone(),
                        series_uid: series_uid.clone(),
                        sop_instance_uid: instance_name(&file.object, &file.path),
                        patient_id: file.object.patient_id(),
                        view_position: view,
                        frontal,
                        source,
                        image_path: rel_path(&image_path, &a.out),
                        resize: meta,
                    },
                )?;
                written += 1;
            }
        }
    }
    write_rejected(&mut manifest, &tree, &a.input)?;
    manifest.finish()?;
    log::info!("wrote {written} images to {}", a.out.display());
    Ok(written)
}

#[derive(Debug, Serialize)]
struct VolumeRecord {
    study_uid: String,
    series_uid: String,
    volume_path: String,
    sidecar_path: String,
    shape: [usize; 3],
    spacing: [f64; 3],
    native_shape: [usize; 3],
    native_spacing: [f64; 3],
    slice_count: usize,
    warnings: usize,
}

#[derive(Debug, Serialize)]
struct SkippedStudy {
    study_uid: String,
    reason: String,
}

pub fn ingest_ct(ctx: &Ctx, a: &CtArgs) -> CmdResult<usize> {
    let tree = walk_dicom(&a.input, options(a.headerless))?;
    let mut manifest = ctx.manifest(&a.out.join("manifest.jsonl"))?;
    let mut written = 0;
    for (study, series) in &tree.studies {
        let summaries = SeriesSummary::from_slices(series.values().flatten().map(|f| &f.object));
        let chosen = match select_series(&summaries) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("study {study}: {e}");
                manifest.write("skipped_study", &SkippedStudy { study_uid: study.clone(), reason: e.to_string() })?;
                continue;
            }
        };
        let slices: Vec<DicomObject> = series[&chosen].iter().map(|f| f.object.clone()).collect();
        let built = match build_volume(&slices) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("study {study}: {e}");
                manifest.write("skipped_study", &SkippedStudy { study_uid: study.clone(), reason: e.to_string() })?;
                continue;
            }
        };
        let volume = built.volume.resample(TARGET_SPACING);
        let sidecar = VolumeSidecar {
            shape: volume.shape,
            spacing: volume.spacing,
            dtype: "float32le".into(),
            series_uid: chosen.clone(),
            source_uids: built.slice_uids.clone(),
            warnings: built.warnings.clone(),
            config_fingerprint: Some(ctx.fingerprint.clone()),
        };
        let dir = a.out.join("volumes");
        std::fs::create_dir_all(&dir)?;
        let (data_path, json_path) = write_volume(&dir, &safe_name(&chosen), &volume, &sidecar)?;
        manifest.write(
            "ct_volume",
            &VolumeRecord {
                study_uid: study.clone(),
                series_uid: chosen,
                volume_path: rel_path(&data_path, &a.out),
                sidecar_path: rel_path(&json_path, &a.out),
                shape: volume.shape,
                spacing: volume.spacing,
                native_shape: built.native_shape,
                native_spacing: built.native_spacing,
                slice_count: slices.len(),
                warnings: built.warnings.len(),
            },
        )?;
        written += 1;
    }
    write_rejected(&mut manifest, &tree, &a.input)?;
    manifest.finish()?;
    log::info!("wrote {written} volumes to {}", a.out.display());
    Ok(written)
}

#[derive(Debug, Serialize)]
struct SliceRecord {
    study_uid: String,
    series_uid: String,
    sop_instance_uid: String,
    window: [f64; 2],
    source: String,
    image_path: String,
    resize: ResizeMeta,
}

pub fn ingest_window(ctx: &Ctx, a: &WindowArgs) -> CmdResult<usize> {
    let window_text = a.window.clone().unwrap_or_else(|| ctx.config.ingest.window.clone());
    let (lo, hi) = parse_window(&window_text).map_err(|e| usage(e.to_string()))?;
    let target = a.target_size.unwrap_or(ctx.config.ingest.target);
    let tree = walk_dicom(&a.input, options(a.headerless))?;
    let mut manifest = ctx.manifest(&a.out.join("manifest.jsonl"))?;
    let text = ctx.png_text();
    let mut written = 0;
    for (study, series) in &tree.studies {
        for (series_uid, files) in series {
            for file in files {
                let obj = &file.object;
                let source = rel_path(&file.path, &a.input);
                let img = window_slice(&obj.rescaled_values(), obj.cols as u32, obj.rows as u32, lo, hi)?;
                let (padded, meta) = resize_pad(&FloatImage::from(&img), target);
                let image_path = a
                    .out
                    .join("slices")
                    .join(safe_name(series_uid))
                    .join(format!("{}.png", safe_name(&instance_name(obj, &file.path))));
                crate::ensure_parent(&image_path)?;
                write_png16(&image_path, &to_gray(&padded), &text)?;
                manifest.write(
                    "ct_slice",
                    &SliceRecord {
                        study_uid: study.clone(),
                        series_uid: series_uid.clone(),
                        sop_instance_uid: instance_name(obj, &file.path),
                        window: [lo, hi],
                        source,
                        image_path: rel_path(&image_path, &a.out),
                        resize: meta,
                    },
                )?;
                written += 1;
            }
        }
    }
    write_rejected(&mut manifest, &tree, &a.input)?;
    manifest.finish()?;
    Ok(written)
}

/// A few radiographs per patient (frontal and lateral) plus one 12-slice axial CT series.
pub fn synth(ctx: &Ctx, out: &Path, patients: usize) -> CmdResult {
    let seed = medeval_core::seed::derive_seed(ctx.seed(), "ingest_synth");
    for p in 0..patients {
        let patient = format!("P{p:03}");
        let study = format!("1.2.826.0.9.{}", p + 1);
        for (k, view) in ["PA", "LATERAL"].iter().enumerate() {
            let instance = format!("{study}.1.{}", k + 1);
            let bytes = chest_xray_builder(&patient, &study, &instance, view, 48, 40, seed.wrapping_add(p as u64))
                .to_bytes();
            let path = out.join("xray").join(&patient).join(format!("{}.dcm", k + 1));
            crate::ensure_parent(&path)?;
            std::fs::write(path, bytes)?;
        }
    }
    let series = "1.2.826.0.7.1";
    for i in 0..12 {
        let z = 2.5 * i as f64;
        let builder = ct_slice_builder(series, i, [0.0, 0.0, z], 24, 24, |y, x| {
            -1000.0 + 40.0 * (x as f64) + 10.0 * (y as f64) + 8.0 * z
        });
        let path = out.join("ct").join(format!("slice{i:02}.dcm"));
        crate::ensure_parent(&path)?;
        std::fs::write(path, builder.to_bytes())?;
    }
    Ok(())
}
