//! DICOM subset parsing and the 2D / 3D preprocessing pipelines.

pub mod dicom;
pub mod fixtures;
pub mod frontal;
pub mod io;
pub mod resample;
pub mod resize;
pub mod tags;
pub mod voi;
pub mod volume;
pub mod window;

pub use dicom::{parse_dicom, parse_dicom_with, write_dicom, DicomError, DicomObject, ParseOptions, Photometric, TransferSyntax};
pub use frontal::{filter_frontal, is_frontal};
pub use resize::{resize_pad, FloatImage, ResizeMeta};
pub use voi::{apply_voi, VoiSpec};
pub use volume::{build_volume, select_series, CtVolume, SeriesSummary};
pub use window::{parse_window, window_slice};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-major 16-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage16 {
    pub width: u32,
    pub height: u32,
    pub samples: Vec<u16>,
}

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error(transparent)]
    Dicom(#[from] DicomError),
    #[error("window width {0} is below 1")]
    DegenerateWindow(f64),
    #[error("invalid window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("inconsistent geometry: {0}")]
    InconsistentGeometry(String),
    #[error("need at least 2 slices, got {0}")]
    TooFewSlices(usize),
    #[error("no axial series with more than 10 slices")]
    NoEligibleSeries,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("png decoding: {0}")]
    PngDecode(#[from] png::DecodingError),
}
