//! CT volume reconstruction from axial slices and series selection.

use super::dicom::DicomObject;
use super::resample::resample_tricubic;
use super::ImagingError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const HU_MIN: f64 = -1024.0;
pub const HU_MAX: f64 = 1024.0;
/// Target voxel spacing (dz, dy, dx) in mm.
pub const TARGET_SPACING: [f64; 3] = [1.4, 0.7, 0.7];
/// Relative deviation from the median slice gap above which a warning is recorded.
pub const SPACING_TOLERANCE: f64 = 0.10;
const AXIAL_TOLERANCE: f64 = 1e-3;

/// Voxels in [0, 1], row-major over (z, y, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtVolume {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub voxels: Vec<f64>,
    pub axial: bool,
}

impl CtVolume {
    /// Clip HU to [-1024, 1024] and scale to [0, 1] without resampling.
    pub fn from_hu(shape: [usize; 3], spacing: [f64; 3], hu: &[f64], axial: bool) -> Result<Self, ImagingError> {
        if hu.len() != shape.iter().product::<usize>() {
            return Err(ImagingError::InconsistentGeometry(format!(
                "{} voxels for shape {:?}",
                hu.len(),
                shape
            )));
        }
        if spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(ImagingError::InconsistentGeometry(format!(
                "non-positive spacing {spacing:?}"
            )));
        }
        Ok(CtVolume {
            shape,
            spacing,
            voxels: hu.iter().map(|&h| normalize_hu(h)).collect(),
            axial,
        })
    }

    /// Tricubic resample to `spacing`, clamped back into [0, 1].
    pub fn resample(&self, spacing: [f64; 3]) -> CtVolume {
        let (mut voxels, shape) = resample_tricubic(&self.voxels, self.shape, self.spacing, spacing);
        for v in voxels.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        CtVolume {
            shape,
            spacing,
            voxels,
            axial: self.axial,
        }
    }

    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.shape[1] + y) * self.shape[2] + x
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f64 {
        self.voxels[self.index(z, y, x)]
    }

    /// Little-endian f32 payload for the volume container.
    pub fn to_le_f32_bytes(&self) -> Vec<u8> {
        self.voxels
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect()
    }
}

pub fn normalize_hu(hu: f64) -> f64 {
    (hu.clamp(HU_MIN, HU_MAX) - HU_MIN) / (HU_MAX - HU_MIN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeometryWarning {
    NonUniformSpacing { min_gap: f64, max_gap: f64, median_gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBuild {
    pub volume: CtVolume,
    /// Slice spacing inferred from positions, before resampling.
    pub native_spacing: [f64; 3],
    pub native_shape: [usize; 3],
    pub warnings: Vec<GeometryWarning>,
    /// SOP instance UIDs in reconstructed order.
    pub slice_uids: Vec<String>,
}

/// Whether row/column cosines are axial up to in-plane flips and transposition.
pub fn is_axial(orientation: &[f64; 6]) -> bool {
    let close = |v: &[f64], axis: usize| {
        v.iter().enumerate().all(|(i, c)| {
            let target = if i == axis { 1.0 } else { 0.0 };
            (c.abs() - target).abs() <= AXIAL_TOLERANCE
        })
    };
    let (row, col) = orientation.split_at(3);
    (close(row, 0) && close(col, 1)) || (close(row, 1) && close(col, 0))
}

fn slice_normal(o: &[f64; 6]) -> [f64; 3] {
    [
        o[1] * o[5] - o[2] * o[4],
        o[2] * o[3] - o[0] * o[5],
        o[0] * o[4] - o[1] * o[3],
    ]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Sort slices along the slice normal, infer spacing, clip/scale HU and
/// resample to [`TARGET_SPACING`].
pub fn build_volume(slices: &[DicomObject]) -> Result<VolumeBuild, ImagingError> {
    build_volume_with_spacing(slices, TARGET_SPACING)
}

pub fn build_volume_with_spacing(
    slices: &[DicomObject],
    target_spacing: [f64; 3],
) -> Result<VolumeBuild, ImagingError> {
    if slices.len() < 2 {
        return Err(ImagingError::TooFewSlices(slices.len()));
    }
    let first = &slices[0];
    let orientation = first
        .image_orientation()
        .ok_or_else(|| ImagingError::InconsistentGeometry("missing Image Orientation (Patient)".into()))?;
    let series = first.series_uid();
    let (rows, cols) = (first.rows, first.cols);
    let pixel_spacing = first.pixel_spacing().unwrap_or([1.0, 1.0]);

    let normal = slice_normal(&orientation);
    let mut keyed = Vec::with_capacity(slices.len());
    for slice in slices {
        if slice.series_uid() != series {
            return Err(ImagingError::InconsistentGeometry("slices from different series".into()));
        }
        if (slice.rows, slice.cols) != (rows, cols) {
            return Err(ImagingError::InconsistentGeometry(format!(
                "slice size {}x{} differs from {}x{}",
                slice.rows, slice.cols, rows, cols
            )));
        }
        let o = slice
            .image_orientation()
            .ok_or_else(|| ImagingError::InconsistentGeometry("missing Image Orientation (Patient)".into()))?;
        if o.iter().zip(orientation.iter()).any(|(a, b)| (a - b).abs() > AXIAL_TOLERANCE) {
            return Err(ImagingError::InconsistentGeometry("orientation mismatch between slices".into()));
        }
        let ps = slice.pixel_spacing().unwrap_or([1.0, 1.0]);
        if ps.iter().zip(pixel_spacing.iter()).any(|(a, b)| (a - b).abs() > 1e-6) {
            return Err(ImagingError::InconsistentGeometry("pixel spacing mismatch between slices".into()));
        }
        let position = slice
            .image_position()
            .ok_or_else(|| ImagingError::InconsistentGeometry("missing Image Position (Patient)".into()))?;
        let distance: f64 = position.iter().zip(normal.iter()).map(|(p, n)| p * n).sum();
        keyed.push((distance, slice));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));

    let gaps: Vec<f64> = keyed.windows(2).map(|w| w[1].0 - w[0].0).collect();
    if gaps.iter().any(|g| *g <= 1e-6) {
        return Err(ImagingError::InconsistentGeometry("duplicate slice positions".into()));
    }
    let mut sorted_gaps = gaps.clone();
    sorted_gaps.sort_by(f64::total_cmp);
    let median_gap = median(&sorted_gaps);
    let mut warnings = Vec::new();
    let (min_gap, max_gap) = (sorted_gaps[0], sorted_gaps[sorted_gaps.len() - 1]);
    if (median_gap - min_gap) > SPACING_TOLERANCE * median_gap
        || (max_gap - median_gap) > SPACING_TOLERANCE * median_gap
    {
        warnings.push(GeometryWarning::NonUniformSpacing {
            min_gap,
            max_gap,
            median_gap,
        });
    }

    let shape = [keyed.len(), rows as usize, cols as usize];
    let mut hu = Vec::with_capacity(shape.iter().product());
    for (_, slice) in &keyed {
        hu.extend(slice.rescaled_values());
    }
    let native_spacing = [median_gap, pixel_spacing[0], pixel_spacing[1]];
    let native = CtVolume::from_hu(shape, native_spacing, &hu, is_axial(&orientation))?;
    let volume = native.resample(target_spacing);
    Ok(VolumeBuild {
        volume,
        native_spacing,
        native_shape: shape,
        warnings,
        slice_uids: keyed
            .iter()
            .map(|(_, s)| s.sop_instance_uid().unwrap_or_default())
            .collect(),
    })
}

/// Per-series summary used for selecting the inference volume of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub series_uid: String,
    pub slice_count: usize,
    pub axial: bool,
}

impl SeriesSummary {
    /// Group slices by series UID; a series is axial when every slice is.
    pub fn from_slices<'a>(slices: impl IntoIterator<Item = &'a DicomObject>) -> Vec<SeriesSummary> {
        let mut groups: BTreeMap<String, (usize, bool)> = BTreeMap::new();
        for s in slices {
            let axial = s.image_orientation().map(|o| is_axial(&o)).unwrap_or(false);
            let entry = groups.entry(s.series_uid().unwrap_or_default()).or_insert((0, true));
            entry.0 += 1;
            entry.1 &= axial;
        }
        groups
            .into_iter()
            .map(|(series_uid, (slice_count, axial))| SeriesSummary {
                series_uid,
                slice_count,
                axial,
            })
            .collect()
    }
}

/// Minimum slice count is exclusive: a series needs more than this many slices.
pub const MIN_AXIAL_SLICES: usize = 10;

/// The axial series with the most slices (more than 10), ties to the smallest UID.
pub fn select_series(study: &[SeriesSummary]) -> Result<String, ImagingError> {
    study
        .iter()
        .filter(|s| s.axial && s.slice_count > MIN_AXIAL_SLICES)
        .min_by(|a, b| {
            b.slice_count
                .cmp(&a.slice_count)
                .then_with(|| a.series_uid.cmp(&b.series_uid))
        })
        .map(|s| s.series_uid.clone())
        .ok_or(ImagingError::NoEligibleSeries)
}
