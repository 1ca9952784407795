//! Aspect-preserving resize onto a square canvas with zero padding.

use super::GrayImage16;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TARGET: u32 = 768;

/// Interleaved float image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn pixel(&self, x: u32, y: u32, c: u32) -> f32 {
        self.data[((y * self.width + x) * self.channels + c) as usize]
    }

    /// Copy the content rectangle recorded in `meta` out of a padded canvas.
    pub fn crop(&self, meta: &ResizeMeta) -> FloatImage {
        let mut data = Vec::with_capacity((meta.content_width * meta.content_height * self.channels) as usize);
        for y in meta.pad_top..meta.pad_top + meta.content_height {
            let start = ((y * self.width + meta.pad_left) * self.channels) as usize;
            let end = start + (meta.content_width * self.channels) as usize;
            data.extend_from_slice(&self.data[start..end]);
        }
        FloatImage {
            width: meta.content_width,
            height: meta.content_height,
            channels: self.channels,
            data,
        }
    }
}

impl From<&GrayImage16> for FloatImage {
    fn from(img: &GrayImage16) -> Self {
        FloatImage {
            width: img.width,
            height: img.height,
            channels: 1,
            data: img.samples.iter().map(|&s| s as f32 / 65535.0).collect(),
        }
    }
}

/// Geometry of a resize-with-pad, enough to undo it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeMeta {
    pub source_width: u32,
    pub source_height: u32,
    pub scale: f64,
    pub content_width: u32,
    pub content_height: u32,
    pub pad_left: u32,
    pub pad_top: u32,
    pub target: u32,
}

impl ResizeMeta {
    pub fn new(width: u32, height: u32, target: u32) -> Self {
        assert!(width >= 1 && height >= 1 && target >= 1, "dimensions must be positive");
        let scale = target as f64 / width.max(height) as f64;
        let fit = |side: u32| ((side as f64 * scale).round() as u32).clamp(1, target);
        let (content_width, content_height) = if width >= height {
            (target, fit(height))
        } else {
            (fit(width), target)
        };
        ResizeMeta {
            source_width: width,
            source_height: height,
            scale,
            content_width,
            content_height,
            pad_left: (target - content_width) / 2,
            pad_top: (target - content_height) / 2,
            target,
        }
    }
}

/// Bilinear sample of `img` at continuous pixel coordinates, clamped to the edges.
fn bilinear(img: &FloatImage, sx: f64, sy: f64, c: u32) -> f32 {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor() as u32;
    let y0 = sy.floor() as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let p = |x, y| img.pixel(x, y, c) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

/// Resample `img` to `width` x `height` with half-pixel-centred bilinear interpolation.
pub fn resize_bilinear(img: &FloatImage, width: u32, height: u32) -> FloatImage {
    let rx = img.width as f64 / width as f64;
    let ry = img.height as f64 / height as f64;
    let mut data = Vec::with_capacity((width * height * img.channels) as usize);
    for y in 0..height {
        let sy = (y as f64 + 0.5) * ry - 0.5;
        for x in 0..width {
            let sx = (x as f64 + 0.5) * rx - 0.5;
            for c in 0..img.channels {
                data.push(bilinear(img, sx, sy, c));
            }
        }
    }
    FloatImage {
        width,
        height,
        channels: img.channels,
        data,
    }
}

/// Scale the longest side to `target`, centre the content and pad with 0.
pub fn resize_pad(img: &FloatImage, target: u32) -> (FloatImage, ResizeMeta) {
    let meta = ResizeMeta::new(img.width, img.height, target);
    let content = if (meta.content_width, meta.content_height) == (img.width, img.height) {
        img.clone()
    } else {
        resize_bilinear(img, meta.content_width, meta.content_height)
    };
    let channels = img.channels;
    let mut data = vec![0.0f32; (target * target * channels) as usize];
    for y in 0..meta.content_height {
        let src = (y * meta.content_width * channels) as usize;
        let dst = (((y + meta.pad_top) * target + meta.pad_left) * channels) as usize;
        let n = (meta.content_width * channels) as usize;
        data[dst..dst + n].copy_from_slice(&content.data[src..src + n]);
    }
    (
        FloatImage {
            width: target,
            height: target,
            channels,
            data,
        },
        meta,
    )
}

/// Undo [`resize_pad`] geometrically: crop the content and resample to the source size.
pub fn unpad(padded: &FloatImage, meta: &ResizeMeta) -> FloatImage {
    let content = padded.crop(meta);
    resize_bilinear(&content, meta.source_width, meta.source_height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(width: u32, height: u32) -> FloatImage {
        FloatImage {
            width,
            height,
            channels: 1,
            data: (0..width * height).map(|i| (i % 97) as f32 / 97.0).collect(),
        }
    }

    #[test]
    fn square_target_is_identity() {
        let img = gray(768, 768);
        let (out, meta) = resize_pad(&img, 768);
        assert_eq!(out, img);
        assert_eq!((meta.pad_left, meta.pad_top), (0, 0));
    }

    #[test]
    fn wide_image_gets_bands() {
        let img = gray(1024, 512);
        let (out, meta) = resize_pad(&img, 768);
        assert_eq!((meta.content_width, meta.content_height), (768, 384));
        assert_eq!((meta.pad_left, meta.pad_top), (0, 192));
        assert!(out.data[..(192 * 768) as usize].iter().all(|&v| v == 0.0));
        assert!(out.data[((192 + 384) * 768) as usize..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_fills_canvas() {
        let img = FloatImage {
            width: 1,
            height: 1,
            channels: 1,
            data: vec![0.25],
        };
        let (out, meta) = resize_pad(&img, 768);
        assert_eq!((meta.content_width, meta.content_height), (768, 768));
        assert!(out.data.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn gray16_is_normalized() {
        let img = GrayImage16 {
            width: 2,
            height: 1,
            samples: vec![0, 65535],
        };
        let f = FloatImage::from(&img);
        assert_eq!(f.data, vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn crop_and_unpad_recover_dimensions(w in 1u32..1500, h in 1u32..1500) {
            let meta = ResizeMeta::new(w, h, 768);
            prop_assert_eq!(meta.content_width.max(meta.content_height), 768);
            prop_assert!(meta.pad_left + meta.content_width <= 768);
            prop_assert!(meta.pad_top + meta.content_height <= 768);
            let ratio_src = w as f64 / h as f64;
            let ratio_dst = meta.content_width as f64 / meta.content_height as f64;
            // Aspect ratio preserved up to rounding of the short side.
            let short = meta.content_width.min(meta.content_height) as f64;
            prop_assert!((ratio_dst / ratio_src - 1.0).abs() <= 1.0 / short + 1e-12);
        }
    }

    #[test]
    fn unpad_restores_source_size() {
        for (w, h) in [(1024, 512), (300, 700), (5, 3), (768, 10)] {
            let img = gray(w, h);
            let (out, meta) = resize_pad(&img, 768);
            let back = unpad(&out, &meta);
            assert_eq!((back.width, back.height), (w, h));
            let content = out.crop(&meta);
            assert_eq!((content.width, content.height), (meta.content_width, meta.content_height));
        }
    }
}
