//! Synthetic DICOM streams: the canonical round-trip fixtures and small
//! chest X-ray / CT studies for tests and demos.

use super::dicom::{DataSet, DicomBuilder, Photometric, TransferSyntax};
use super::tags::{self, Vr};
use crate::seed::stage_rng;
use rand::Rng;

fn ramp(n: usize, modulus: u16) -> Vec<u16> {
    (0..n).map(|i| (i as u16).wrapping_mul(37) % modulus).collect()
}

/// Ten small files covering the supported subset: both transfer syntaxes,
/// headerless implicit, MONOCHROME1, rescale/window, VOI LUT sequences of
/// defined and undefined length, LINEAR_EXACT, signed CT pixels and odd-length
/// value padding.
pub fn canonical_fixtures() -> Vec<(&'static str, DicomBuilder)> {
    let explicit = || DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian);
    let implicit = || DicomBuilder::new(TransferSyntax::ImplicitVrLittleEndian);
    let mut lut_item = DataSet::new();
    lut_item.set_u16s(tags::LUT_DESCRIPTOR, Vr::US, &[4, 0, 16]);
    lut_item.set_u16s(tags::LUT_DATA, Vr::OW, &[0, 100, 4000, 65535]);
    vec![
        (
            "explicit_minimal",
            explicit().string(tags::SOP_INSTANCE_UID, Vr::UI, "1.2.826.0.1.1").pixels(2, 3, 16, &ramp(6, 65535)),
        ),
        (
            "implicit_minimal",
            implicit().string(tags::SOP_INSTANCE_UID, Vr::UI, "1.2.826.0.1.2").pixels(3, 2, 16, &ramp(6, 65535)),
        ),
        ("headerless_implicit", DicomBuilder::headerless().pixels(2, 2, 16, &[1, 2, 3, 4])),
        (
            "monochrome1",
            explicit()
                .photometric(Photometric::Monochrome1)
                .string(tags::VIEW_POSITION, Vr::CS, "PA")
                .pixels(4, 4, 12, &ramp(16, 4096)),
        ),
        (
            "rescale_window",
            explicit()
                .rescale(2.0, -1024.0)
                .window(40.0, 400.0)
                .string(tags::PATIENT_ID, Vr::LO, "PAT01")
                .pixels(4, 4, 12, &ramp(16, 4096)),
        ),
        (
            "voi_lut_defined",
            explicit().voi_luts(&[(0, vec![0, 1000, 30000, 65535]), (2, vec![7, 8])]).pixels(2, 2, 16, &[0, 1, 2, 3]),
        ),
        (
            "voi_lut_undefined_length",
            implicit()
                .sequence(tags::VOI_LUT_SEQUENCE, vec![lut_item], true)
                .pixels(2, 2, 16, &[0, 1, 2, 3]),
        ),
        (
            "linear_exact",
            explicit()
                .window(0.0, 2.0)
                .string(tags::VOI_LUT_FUNCTION, Vr::CS, "LINEAR_EXACT")
                .signed_pixels(1, 3, &[-1, 0, 1]),
        ),
        (
            "ct_signed",
            ct_slice_builder("1.2.826.0.9", 0, [0.0, 0.0, -5.0], 4, 4, |y, x| -1000.0 + 100.0 * (y * 4 + x) as f64),
        ),
        (
            "odd_length_values",
            explicit()
                .string(tags::PATIENT_ID, Vr::LO, "ODD")
                .string(tags::STUDY_INSTANCE_UID, Vr::UI, "1.2.3")
                .string(tags::MODALITY, Vr::CS, "DX")
                .pixels(1, 1, 8, &[255]),
        ),
    ]
}

/// One axial CT slice with rescale intercept -1024 and the HU values given by `hu(y, x)`.
pub fn ct_slice_builder(
    series_uid: &str,
    index: usize,
    position: [f64; 3],
    rows: u16,
    cols: u16,
    hu: impl Fn(usize, usize) -> f64,
) -> DicomBuilder {
    let samples: Vec<i16> = (0..rows as usize)
        .flat_map(|y| (0..cols as usize).map(move |x| (y, x)))
        .map(|(y, x)| (hu(y, x) + 1024.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect();
    DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
        .string(tags::SOP_CLASS_UID, Vr::UI, "1.2.840.10008.5.1.4.1.1.2")
        .string(tags::SOP_INSTANCE_UID, Vr::UI, &format!("{series_uid}.{}", index + 1))
        .string(tags::MODALITY, Vr::CS, "CT")
        .string(tags::STUDY_INSTANCE_UID, Vr::UI, "1.2.826.0.7")
        .string(tags::SERIES_INSTANCE_UID, Vr::UI, series_uid)
        .decimals(tags::IMAGE_POSITION_PATIENT, &position)
        .decimals(tags::IMAGE_ORIENTATION_PATIENT, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        .decimals(tags::PIXEL_SPACING, &[0.7, 0.7])
        .rescale(1.0, -1024.0)
        .signed_pixels(rows, cols, &samples)
}

/// A chest radiograph-like 12-bit image with a seeded smooth pattern.
pub fn chest_xray_builder(patient: &str, study: &str, instance: &str, view: &str, rows: u16, cols: u16, seed: u64) -> DicomBuilder {
    let mut rng = stage_rng(seed, &format!("fixture/{instance}"));
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let samples: Vec<u16> = (0..rows as usize * cols as usize)
        .map(|i| {
            let (y, x) = ((i / cols as usize) as f64, (i % cols as usize) as f64);
            let v = 2048.0 + 1500.0 * ((x / 7.0 + phase).sin() * (y / 11.0).cos());
            v.round() as u16
        })
        .collect();
    DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
        .string(tags::SOP_INSTANCE_UID, Vr::UI, instance)
        .string(tags::MODALITY, Vr::CS, "DX")
        .string(tags::PATIENT_ID, Vr::LO, patient)
        .string(tags::VIEW_POSITION, Vr::CS, view)
        .string(tags::STUDY_INSTANCE_UID, Vr::UI, study)
        .string(tags::SERIES_INSTANCE_UID, Vr::UI, &format!("{study}.1"))
        .window(2048.0, 4096.0)
        .pixels(rows, cols, 12, &samples)
}
