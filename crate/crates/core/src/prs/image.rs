use super::{PrsError, PrsProfile, CHANNELS};
use crate::imaging::resize::FloatImage;
use serde::{Deserialize, Serialize};

/// Side of one trait block in pixels.
pub const BLOCK: u32 = 8;

/// Per-trait, per-channel (min, max) fitted on training individuals only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// `min[c][t]`, `max[c][t]`.
    pub min: [Vec<f64>; CHANNELS],
    pub max: [Vec<f64>; CHANNELS],
}

impl NormStats {
    pub fn trait_count(&self) -> usize {
        self.min[0].len()
    }

    /// Byte value for score `s` of trait `t` in channel `c`; constant traits give 128.
    pub fn encode(&self, c: usize, t: usize, s: f64) -> u8 {
        let (lo, hi) = (self.min[c][t], self.max[c][t]);
        if hi <= lo {
            return 128;
        }
        (255.0 * ((s - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8
    }
}

pub fn fit_norm(train: &[PrsProfile]) -> Result<NormStats, PrsError> {
    let first = train.first().ok_or(PrsError::EmptyTrainingSet)?;
    let t = first.trait_count();
    let mut min: [Vec<f64>; CHANNELS] = std::array::from_fn(|_| vec![f64::INFINITY; t]);
    let mut max: [Vec<f64>; CHANNELS] = std::array::from_fn(|_| vec![f64::NEG_INFINITY; t]);
    for p in train {
        if p.trait_count() != t {
            return Err(PrsError::LengthMismatch { expected: t, got: p.trait_count() });
        }
        for c in 0..CHANNELS {
            for (i, &s) in p.scores[c].iter().enumerate() {
                min[c][i] = min[c][i].min(s);
                max[c][i] = max[c][i].max(s);
            }
        }
    }
    Ok(NormStats { min, max })
}

/// Smallest G with G * G >= traits.
pub fn grid_side(traits: usize) -> usize {
    if traits == 0 {
        return 0;
    }
    let mut g = (traits as f64).sqrt() as usize;
    while g * g < traits {
        g += 1;
    }
    while g > 1 && (g - 1) * (g - 1) >= traits {
        g -= 1;
    }
    g
}

/// 8-bit RGB image, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenomicImage {
    pub width: u32,
    pub height: u32,
    pub bytes: Vec<u8>,
}

impl GenomicImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.bytes[i], self.bytes[i + 1], self.bytes[i + 2]]
    }

    /// Value of trait block (row, col) in each channel.
    pub fn block(&self, row: u32, col: u32) -> [u8; 3] {
        self.pixel(col * BLOCK, row * BLOCK)
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        }
    }
}

/// Trait `t` fills 8x8 block (t / G, t % G) of a G x G grid; unused blocks stay 0.
pub fn render_genomic_image(profile: &PrsProfile, stats: &NormStats) -> Result<GenomicImage, PrsError> {
    let t = stats.trait_count();
    if profile.trait_count() != t {
        return Err(PrsError::LengthMismatch { expected: t, got: profile.trait_count() });
    }
    let g = grid_side(t);
    let side = g as u32 * BLOCK;
    let mut bytes = vec![0u8; (side * side * 3) as usize];
    for trait_index in 0..t {
        let rgb: [u8; 3] = std::array::from_fn(|c| stats.encode(c, trait_index, profile.scores[c][trait_index]));
        let by = (trait_index / g) as u32 * BLOCK;
        let bx = (trait_index % g) as u32 * BLOCK;
        for y in by..by + BLOCK {
            for x in bx..bx + BLOCK {
                let i = ((y * side + x) * 3) as usize;
                bytes[i..i + 3].copy_from_slice(&rgb);
            }
        }
    }
    Ok(GenomicImage {
        width: side,
        height: side,
        bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(id: &str, scores: [Vec<f64>; 3]) -> PrsProfile {
        PrsProfile::new(id, scores).unwrap()
    }

    #[test]
    fn grid_side_matches_brute_force() {
        for t in 1..3000usize {
            let brute = (1..).find(|g: &usize| g * g >= t).unwrap();
            assert_eq!(grid_side(t), brute, "T={t}");
        }
        assert_eq!(grid_side(7415), 87);
        assert_eq!(grid_side(7145), 85);
    }

    #[test]
    fn fit_min_max() {
        let a = profile("a", [vec![1.0, 5.0], vec![0.0, 5.0], vec![2.0, 5.0]]);
        let b = profile("b", [vec![3.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0]]);
        let s = fit_norm(&[a.clone(), b]).unwrap();
        assert_eq!((s.min[0][0], s.max[0][0]), (1.0, 3.0));
        assert_eq!(s.encode(0, 1, 5.0), 128);
        assert_eq!(s.encode(2, 0, 2.0), 128);
        let img = render_genomic_image(&a, &s).unwrap();
        assert_eq!((img.width, img.height), (16, 16));
        assert_eq!(img.block(0, 0), [0, 0, 128]);
        assert_eq!(img.block(0, 1), [128, 128, 128]);
        assert_eq!(img.block(1, 0), [0, 0, 0]);
        assert_eq!(fit_norm(&[]), Err(PrsError::EmptyTrainingSet));
    }

    #[test]
    fn train_max_maps_to_255_and_test_is_clamped() {
        let train = [
            profile("a", [vec![0.0], vec![0.0], vec![0.0]]),
            profile("b", [vec![2.0], vec![4.0], vec![8.0]]),
        ];
        let s = fit_norm(&train).unwrap();
        let img = render_genomic_image(&profile("t", [vec![2.0], vec![1.0], vec![100.0]]), &s).unwrap();
        assert_eq!(img.block(0, 0), [255, 64, 255]);
    }

    #[test]
    fn t7415_renders_696() {
        let t = 7415;
        let p = profile("x", [vec![0.0; t], vec![0.0; t], vec![0.0; t]]);
        let s = fit_norm(std::slice::from_ref(&p)).unwrap();
        let lo = NormStats {
            min: s.min.clone(),
            max: std::array::from_fn(|_| vec![1.0; t]),
        };
        let img = render_genomic_image(&p, &lo).unwrap();
        assert_eq!((img.width, img.height), (696, 696));
        assert!(img.bytes.iter().all(|&b| b == 0));
    }

    #[test]
    fn length_mismatch() {
        let s = fit_norm(&[profile("a", [vec![0.0], vec![0.0], vec![0.0]])]).unwrap();
        let p = profile("b", [vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert!(matches!(render_genomic_image(&p, &s), Err(PrsError::LengthMismatch { .. })));
    }

    fn scores(t: usize) -> impl Strategy<Value = Vec<[Vec<f64>; 3]>> {
        prop::collection::vec(
            (
                prop::collection::vec(-5.0..5.0f64, t),
                prop::collection::vec(-5.0..5.0f64, t),
                prop::collection::vec(-5.0..5.0f64, t),
            )
                .prop_map(|(a, b, c)| [a, b, c]),
            1..5,
        )
    }

    proptest! {
        #[test]
        fn blocks_are_constant(rows in (1usize..30).prop_flat_map(scores)) {
            let profiles: Vec<_> = rows.into_iter().enumerate().map(|(i, s)| profile(&i.to_string(), s)).collect();
            let stats = fit_norm(&profiles).unwrap();
            let img = render_genomic_image(&profiles[0], &stats).unwrap();
            prop_assert_eq!(img.width % BLOCK, 0);
            for y in 0..img.height {
                for x in 0..img.width {
                    prop_assert_eq!(img.pixel(x, y), img.pixel(x - x % BLOCK, y - y % BLOCK));
                }
            }
        }

        #[test]
        fn permuting_traits_permutes_blocks(rows in (2usize..20).prop_flat_map(scores), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let t = rows[0][0].len();
            let mut perm: Vec<usize> = (0..t).collect();
            perm.shuffle(&mut crate::seed::stage_rng(seed, "perm"));
            let profiles: Vec<_> = rows.iter().enumerate().map(|(i, s)| profile(&i.to_string(), s.clone())).collect();
            let permuted: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(i, s)| profile(&i.to_string(), std::array::from_fn(|c| perm.iter().map(|&j| s[c][j]).collect())))
                .collect();
            let a = render_genomic_image(&profiles[0], &fit_norm(&profiles).unwrap()).unwrap();
            let b = render_genomic_image(&permuted[0], &fit_norm(&permuted).unwrap()).unwrap();
            let g = grid_side(t);
            for (k, &j) in perm.iter().enumerate() {
                let bk = b.block((k / g) as u32, (k % g) as u32);
                let aj = a.block((j / g) as u32, (j % g) as u32);
                prop_assert_eq!(bk, aj);
            }
        }
    }
}
