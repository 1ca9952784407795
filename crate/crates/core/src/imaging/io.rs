//! File outputs for ingested images and volumes, and a directory walker.

use super::dicom::{parse_dicom_with, DicomError, DicomObject, ParseOptions};
use super::volume::{CtVolume, GeometryWarning};
use super::{GrayImage16, ImagingError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn encoder<W: Write>(
    w: W,
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    text: &[(&str, &str)],
) -> Result<png::Writer<W>, ImagingError> {
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.to_string())?;
    }
    Ok(enc.write_header()?)
}

/// Encode a 16-bit grayscale PNG. `text` entries become tEXt chunks.
pub fn encode_png16(img: &GrayImage16, text: &[(&str, &str)]) -> Result<Vec<u8>, ImagingError> {
    let mut out = Vec::new();
    {
        let mut writer = encoder(&mut out, img.width, img.height, png::ColorType::Grayscale, png::BitDepth::Sixteen, text)?;
        let bytes: Vec<u8> = img.samples.iter().flat_map(|s| s.to_be_bytes()).collect();
        writer.write_image_data(&bytes)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Encode an 8-bit grayscale PNG from samples already in 0..=255.
pub fn encode_png8(width: u32, height: u32, samples: &[u8], text: &[(&str, &str)]) -> Result<Vec<u8>, ImagingError> {
    let mut out = Vec::new();
    {
        let mut writer = encoder(&mut out, width, height, png::ColorType::Grayscale, png::BitDepth::Eight, text)?;
        writer.write_image_data(samples)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Encode an 8-bit RGB PNG from interleaved samples.
pub fn encode_png_rgb8(width: u32, height: u32, samples: &[u8], text: &[(&str, &str)]) -> Result<Vec<u8>, ImagingError> {
    let mut out = Vec::new();
    {
        let mut writer = encoder(&mut out, width, height, png::ColorType::Rgb, png::BitDepth::Eight, text)?;
        writer.write_image_data(samples)?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn decode_png16(bytes: &[u8]) -> Result<GrayImage16, ImagingError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
        return Err(ImagingError::InconsistentGeometry("expected 16-bit grayscale PNG".into()));
    }
    let samples = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(GrayImage16 {
        width: info.width,
        height: info.height,
        samples,
    })
}

pub fn write_png16(path: &Path, img: &GrayImage16, text: &[(&str, &str)]) -> Result<(), ImagingError> {
    std::fs::write(path, encode_png16(img, text)?)?;
    Ok(())
}

/// JSON sidecar describing a flat float32 volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSidecar {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub dtype: String,
    pub series_uid: String,
    pub source_uids: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<GeometryWarning>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_fingerprint: Option<String>,
}

/// Write `<stem>.f32` (little-endian float32, z-major) and `<stem>.json`.
pub fn write_volume(dir: &Path, stem: &str, volume: &CtVolume, sidecar: &VolumeSidecar) -> Result<(PathBuf, PathBuf), ImagingError> {
    let data_path = dir.join(format!("{stem}.f32"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = BufWriter::new(File::create(&data_path)?);
    w.write_all(&volume.to_le_f32_bytes())?;
    w.flush()?;
    let json = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(&json_path, json)?;
    Ok((data_path, json_path))
}

pub fn read_volume(data_path: &Path, json_path: &Path) -> Result<(Vec<f32>, VolumeSidecar), ImagingError> {
    let sidecar: VolumeSidecar = serde_json::from_slice(&std::fs::read(json_path)?)
        .map_err(|e| ImagingError::InconsistentGeometry(format!("sidecar: {e}")))?;
    let bytes = std::fs::read(data_path)?;
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let expected: usize = sidecar.shape.iter().product();
    if values.len() != expected {
        return Err(ImagingError::InconsistentGeometry(format!(
            "{} voxels on disk, sidecar says {expected}",
            values.len()
        )));
    }
    Ok((values, sidecar))
}

#[derive(Debug)]
pub struct ParsedFile {
    pub path: PathBuf,
    pub object: DicomObject,
}

/// Parsed files grouped by study UID, then series UID. Missing UIDs group under "".
#[derive(Debug, Default)]
pub struct StudyTree {
    pub studies: BTreeMap<String, BTreeMap<String, Vec<ParsedFile>>>,
    pub rejected: Vec<(PathBuf, DicomError)>,
}

/// Parse every regular file under `root`. Files that are not DICOM at all are
/// skipped silently; DICOM files that fail to parse are reported in `rejected`.
pub fn walk_dicom(root: &Path, options: ParseOptions) -> Result<StudyTree, ImagingError> {
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| ImagingError::Io(std::io::Error::other(e)))?;
        if entry.file_type().is_file() {
            paths.push(entry.into_path());
        }
    }
    let parsed: Vec<(PathBuf, Result<DicomObject, DicomError>)> = paths
        .into_par_iter()
        .map(|p| {
            let result = std::fs::read(&p)
                .map_err(|e| DicomError::Malformed { offset: 0, reason: e.to_string() })
                .and_then(|b| parse_dicom_with(&b, options));
            (p, result)
        })
        .collect();
    let mut tree = StudyTree::default();
    for (path, result) in parsed {
        match result {
            Ok(object) => {
                let study = object.study_uid().unwrap_or_default();
                let series = object.series_uid().unwrap_or_default();
                tree.studies
                    .entry(study)
                    .or_default()
                    .entry(series)
                    .or_default()
                    .push(ParsedFile { path, object });
            }
            Err(DicomError::NotDicom) => {}
            Err(e) => tree.rejected.push((path, e)),
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::dicom::{DicomBuilder, TransferSyntax};
    use crate::imaging::tags::{self, Vr};

    #[test]
    fn png16_round_trip_with_text() {
        let img = GrayImage16 {
            width: 3,
            height: 2,
            samples: vec![0, 1, 256, 32768, 65534, 65535],
        };
        let bytes = encode_png16(&img, &[("config_sha256", "abc")]).unwrap();
        assert_eq!(decode_png16(&bytes).unwrap(), img);
        let reader = png::Decoder::new(std::io::Cursor::new(&bytes)).read_info().unwrap();
        let text = &reader.info().uncompressed_latin1_text;
        assert_eq!(text[0].keyword, "config_sha256");
        assert_eq!(text[0].text, "abc");
    }

    #[test]
    fn volume_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let vol = CtVolume::from_hu([2, 1, 2], [1.0, 1.0, 1.0], &[-1024.0, 0.0, 1024.0, 512.0], true).unwrap();
        let sidecar = VolumeSidecar {
            shape: vol.shape,
            spacing: vol.spacing,
            dtype: "float32-le".into(),
            series_uid: "1.2".into(),
            source_uids: vec!["1.2.1".into(), "1.2.2".into()],
            warnings: vec![],
            config_fingerprint: None,
        };
        let (d, j) = write_volume(dir.path(), "vol", &vol, &sidecar).unwrap();
        let (values, back) = read_volume(&d, &j).unwrap();
        assert_eq!(back, sidecar);
        assert_eq!(values, vec![0.0, 0.5, 1.0, 0.75]);
    }

    #[test]
    fn walker_groups_by_study_and_series() {
        let dir = tempfile::tempdir().unwrap();
        let file = |study: &str, series: &str, sop: &str| {
            DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
                .string(tags::STUDY_INSTANCE_UID, Vr::UI, study)
                .string(tags::SERIES_INSTANCE_UID, Vr::UI, series)
                .string(tags::SOP_INSTANCE_UID, Vr::UI, sop)
                .pixels(1, 1, 16, &[0])
                .to_bytes()
        };
        std::fs::create_dir(dir.path().join("a")).unwrap();
        std::fs::write(dir.path().join("a/1.dcm"), file("1", "1.1", "1.1.1")).unwrap();
        std::fs::write(dir.path().join("a/2.dcm"), file("1", "1.1", "1.1.2")).unwrap();
        std::fs::write(dir.path().join("3.dcm"), file("2", "2.1", "2.1.1")).unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"hello").unwrap();
        let tree = walk_dicom(dir.path(), ParseOptions::default()).unwrap();
        assert_eq!(tree.studies.len(), 2);
        assert_eq!(tree.studies["1"]["1.1"].len(), 2);
        assert_eq!(tree.studies["2"]["2.1"].len(), 1);
        assert!(tree.rejected.is_empty());
    }
}
