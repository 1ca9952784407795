//! 2D X-ray display pipeline: modality rescale, first VOI LUT, linear window,
//! MONOCHROME1 inversion, then a full-range rescale into 16 bits.

use super::dicom::{DicomObject, Photometric};
use super::tags;
use super::{GrayImage16, ImagingError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut {
    pub first_mapped: i32,
    pub entries: Vec<u16>,
}

impl Lut {
    pub fn lookup(&self, value: f64) -> f64 {
        if self.entries.is_empty() {
            return value;
        }
        let last = self.entries.len() as i64 - 1;
        let index = (value.round() as i64 - self.first_mapped as i64).clamp(0, last);
        self.entries[index as usize] as f64
    }
}

/// Window function. `Linear` is the DICOM default; files may request `LINEAR_EXACT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowFunction {
    #[default]
    Linear,
    LinearExact,
}

impl WindowFunction {
    /// Normalized output in [0, 1].
    pub fn apply(self, value: f64, center: f64, width: f64) -> f64 {
        let y = match self {
            WindowFunction::Linear => (value - (center - 0.5)) / (width - 1.0) + 0.5,
            WindowFunction::LinearExact => (value - center) / width + 0.5,
        };
        y.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoiSpec {
    pub luts: Vec<Lut>,
    pub window_center: Option<f64>,
    pub window_width: Option<f64>,
    #[serde(default)]
    pub function: WindowFunction,
}

impl VoiSpec {
    /// Collect LUTs and window attributes from an object. Multi-valued
    /// window attributes contribute their first value.
    pub fn from_object(obj: &DicomObject) -> Self {
        let ds = &obj.dataset;
        let luts = ds
            .items(tags::VOI_LUT_SEQUENCE)
            .unwrap_or(&[])
            .iter()
            .filter_map(|item| {
                let descriptor = item.elements.u16_values(tags::LUT_DESCRIPTOR)?;
                let entries = item.elements.u16_values(tags::LUT_DATA)?;
                if descriptor.len() < 3 {
                    return None;
                }
                let declared = if descriptor[0] == 0 { 65536 } else { descriptor[0] as usize };
                let first_mapped = if obj.pixel_representation == 1 {
                    descriptor[1] as i16 as i32
                } else {
                    descriptor[1] as i32
                };
                let entries = entries.into_iter().take(declared).collect();
                Some(Lut { first_mapped, entries })
            })
            .collect();
        let first = |tag| ds.decimals(tag).and_then(|v| v.first().copied());
        let function = match ds.string(tags::VOI_LUT_FUNCTION).as_deref() {
            Some("LINEAR_EXACT") => WindowFunction::LinearExact,
            _ => WindowFunction::Linear,
        };
        VoiSpec {
            luts,
            window_center: first(tags::WINDOW_CENTER),
            window_width: first(tags::WINDOW_WIDTH),
            function,
        }
    }

    fn window(&self) -> Result<Option<(f64, f64)>, ImagingError> {
        match (self.window_center, self.window_width) {
            (Some(c), Some(w)) => {
                if !(w >= 1.0) {
                    return Err(ImagingError::DegenerateWindow(w));
                }
                Ok(Some((c, w)))
            }
            _ => Ok(None),
        }
    }
}

pub fn apply_voi(obj: &DicomObject, voi: &VoiSpec) -> Result<GrayImage16, ImagingError> {
    let window = voi.window()?;
    let mut values = obj.rescaled_values();
    if let Some(lut) = voi.luts.first() {
        for v in values.iter_mut() {
            *v = lut.lookup(*v);
        }
    }
    // Windowed values already live on the nominal [0, 1] scale; otherwise the
    // observed value range is stretched to full scale.
    let normalized: Vec<f64> = match window {
        Some((c, w)) => values.iter().map(|&v| voi.function.apply(v, c, w)).collect(),
        None => {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let span = hi - lo;
            values
                .iter()
                .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
                .collect()
        }
    };
    let invert = obj.photometric == Photometric::Monochrome1;
    let samples = normalized
        .into_iter()
        .map(|u| {
            let u = if invert { 1.0 - u } else { u };
            (u * 65535.0).round().clamp(0.0, 65535.0) as u16
        })
        .collect();
    Ok(GrayImage16 {
        width: obj.cols as u32,
        height: obj.rows as u32,
        samples,
    })
}
