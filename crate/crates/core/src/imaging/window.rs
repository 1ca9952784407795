use super::{GrayImage16, ImagingError};

/// Clamp HU values to `[lo_hu, hi_hu]` and map that range affinely onto [0, 65535].
pub fn window_slice(hu: &[f64], width: u32, height: u32, lo_hu: f64, hi_hu: f64) -> Result<GrayImage16, ImagingError> {
    if !(lo_hu < hi_hu) || !lo_hu.is_finite() || !hi_hu.is_finite() {
        return Err(ImagingError::InvalidWindow { lo: lo_hu, hi: hi_hu });
    }
    if hu.len() != width as usize * height as usize {
        return Err(ImagingError::InconsistentGeometry(format!(
            "{} samples for {width}x{height}",
            hu.len()
        )));
    }
    let span = hi_hu - lo_hu;
    let samples = hu
        .iter()
        .map(|&v| {
            let u = (v.clamp(lo_hu, hi_hu) - lo_hu) / span;
            (u * 65535.0).round() as u16
        })
        .collect();
    Ok(GrayImage16 { width, height, samples })
}

/// Parse a `LO:HI` window argument such as `-1400:100`.
pub fn parse_window(text: &str) -> Result<(f64, f64), ImagingError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or(ImagingError::InvalidWindow { lo: f64::NAN, hi: f64::NAN })?;
    let lo: f64 = lo.trim().parse().map_err(|_| ImagingError::InvalidWindow { lo: f64::NAN, hi: f64::NAN })?;
    let hi: f64 = hi.trim().parse().map_err(|_| ImagingError::InvalidWindow { lo, hi: f64::NAN })?;
    if !(lo < hi) {
        return Err(ImagingError::InvalidWindow { lo, hi });
    }
    Ok((lo, hi))
}

/// Lung screening slice window.
pub const NLST_WINDOW: (f64, f64) = (-1400.0, 100.0);
/// Abdominal/pelvic 2D CT slice window.
pub const CT_SLICE_WINDOW: (f64, f64) = (-1000.0, 100.0);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nlst_endpoints() {
        let out = window_slice(&[-1400.0, 100.0, -2000.0, 500.0], 4, 1, NLST_WINDOW.0, NLST_WINDOW.1).unwrap();
        assert_eq!(out.samples, vec![0, 65535, 0, 65535]);
    }

    #[test]
    fn midpoint_of_ct_window() {
        // (-450 + 1000) / 1100 * 65535 = 32767.5
        let out = window_slice(&[-450.0], 1, 1, CT_SLICE_WINDOW.0, CT_SLICE_WINDOW.1).unwrap();
        assert!((out.samples[0] as i32 - 32768).abs() <= 1);
    }

    #[test]
    fn invalid_windows() {
        assert!(matches!(window_slice(&[0.0], 1, 1, 5.0, 5.0), Err(ImagingError::InvalidWindow { .. })));
        assert!(parse_window("100:-1400").is_err());
        assert!(parse_window("abc").is_err());
        assert_eq!(parse_window("-1400:100").unwrap(), (-1400.0, 100.0));
    }
}
