use medeval_core::imaging::dicom::{DicomBuilder, TransferSyntax};
use medeval_core::imaging::fixtures::{canonical_fixtures, ct_slice_builder};
use medeval_core::imaging::tags::{self, Vr};
use medeval_core::imaging::volume::{build_volume_with_spacing, TARGET_SPACING};
use medeval_core::imaging::{apply_voi, parse_dicom_with, write_dicom, CtVolume, ParseOptions, Photometric, VoiSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn canonical_fixtures_round_trip_byte_identical() {
    let fixtures = canonical_fixtures();
    assert_eq!(fixtures.len(), 10);
    for (name, builder) in fixtures {
        let bytes = builder.to_bytes();
        let options = ParseOptions { headerless_implicit: name == "headerless_implicit" };
        let first = parse_dicom_with(&bytes, options).unwrap_or_else(|e| panic!("{name}: {e}"));
        let written = write_dicom(&first);
        assert_eq!(written, bytes, "{name}: write(parse(x)) != x");
        let second = parse_dicom_with(&written, options).unwrap();
        assert_eq!(first, second, "{name}: parse is not a fixpoint");
    }
}

#[test]
fn window_endpoints_are_exact() {
    // LINEAR: lo = c - 0.5 - (w-1)/2 maps to 0, hi = c - 0.5 + (w-1)/2 maps to 1.
    let obj = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
        .window(300.5, 401.0)
        .pixels(1, 4, 16, &[100, 500, 0, 1000])
        .build()
        .unwrap();
    let out = apply_voi(&obj, &VoiSpec::from_object(&obj)).unwrap();
    assert_eq!(out.samples, vec![0, 65535, 0, 65535]);
}

fn random_image() -> impl Strategy<Value = (Vec<u16>, f64, f64, f64, f64, bool)> {
    (
        prop::collection::vec(0u16..4096, 16),
        0.1f64..4.0,
        -2000.0f64..2000.0,
        -1000.0f64..5000.0,
        1.0f64..8000.0,
        any::<bool>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn voi_is_monotone((samples, slope, intercept, center, width, windowed) in random_image()) {
        let mut b = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian).rescale(slope, intercept);
        if windowed {
            b = b.window(center, width);
        }
        let obj = b.pixels(4, 4, 12, &samples).build().unwrap();
        prop_assert_eq!(obj.photometric, Photometric::Monochrome2);
        let out = apply_voi(&obj, &VoiSpec::from_object(&obj)).unwrap();
        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by_key(|&i| samples[i]);
        for w in order.windows(2) {
            prop_assert!(out.samples[w[0]] <= out.samples[w[1]]);
        }
    }
}

#[test]
fn monochrome1_reverses_order() {
    let samples: Vec<u16> = (0..16).map(|i| i * 200).collect();
    let obj = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
        .photometric(Photometric::Monochrome1)
        .pixels(4, 4, 12, &samples)
        .build()
        .unwrap();
    let out = apply_voi(&obj, &VoiSpec::from_object(&obj)).unwrap();
    assert_eq!(out.samples[0], 65535);
    assert_eq!(out.samples[15], 0);
    assert!(out.samples.windows(2).all(|w| w[0] >= w[1]));
}

fn hu_volume(shape: [usize; 3], f: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(shape.iter().product());
    for z in 0..shape[0] {
        for y in 0..shape[1] {
            for x in 0..shape[2] {
                out.push(f(z, y, x));
            }
        }
    }
    out
}

#[test]
fn tricubic_reproduces_constant_and_linear_fields() {
    let shape = [64, 64, 64];
    let spacing = [2.0, 0.9, 1.1];
    let constant = CtVolume::from_hu(shape, spacing, &hu_volume(shape, |_, _, _| 40.0), true).unwrap();
    let out = constant.resample(TARGET_SPACING);
    assert_eq!(out.spacing, TARGET_SPACING);
    let c = constant.voxels[0];
    assert!(out.voxels.iter().all(|v| (v - c).abs() < 1e-9));

    let linear_hu = |z: usize, y: usize, x: usize| -900.0 + 5.0 * z as f64 * spacing[0] + 3.0 * y as f64 * spacing[1] + 2.0 * x as f64 * spacing[2];
    let start = std::time::Instant::now();
    let out = CtVolume::from_hu(shape, spacing, &hu_volume(shape, linear_hu), true).unwrap().resample(TARGET_SPACING);
    let elapsed = start.elapsed();
    let [_, oy, ox] = out.shape;
    let mut worst = 0.0f64;
    for (i, v) in out.voxels.iter().enumerate() {
        let (z, y, x) = (i / (oy * ox), (i / ox) % oy, i % ox);
        let hu = -900.0 + 5.0 * z as f64 * 1.4 + 3.0 * y as f64 * 0.7 + 2.0 * x as f64 * 0.7;
        let expected = (hu.clamp(-1024.0, 1024.0) + 1024.0) / 2048.0;
        worst = worst.max((v - expected).abs());
    }
    assert!(worst < 1e-9, "max error {worst}");
    assert!(elapsed.as_secs_f64() < 10.0, "{elapsed:?}");
}

#[test]
fn slice_order_does_not_matter() {
    let series = "1.2.826.0.42";
    let slices: Vec<_> = (0..6)
        .map(|k| {
            ct_slice_builder(series, k, [0.0, 0.0, -20.0 + 2.5 * k as f64], 6, 5, |y, x| {
                -500.0 + 40.0 * k as f64 + 7.0 * y as f64 - 3.0 * x as f64
            })
            .build()
            .unwrap()
        })
        .collect();
    let reference = build_volume_with_spacing(&slices, TARGET_SPACING).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut shuffled = slices.clone();
        shuffled.shuffle(&mut rng);
        let again = build_volume_with_spacing(&shuffled, TARGET_SPACING).unwrap();
        assert_eq!(again.volume, reference.volume);
        assert_eq!(again.slice_uids, reference.slice_uids);
    }
    assert_eq!(reference.native_spacing, [2.5, 0.7, 0.7]);
}

#[test]
fn modality_and_view_tags_survive_round_trip() {
    let bytes = DicomBuilder::new(TransferSyntax::ImplicitVrLittleEndian)
        .string(tags::VIEW_POSITION, Vr::CS, "AP")
        .pixels(1, 1, 16, &[1])
        .to_bytes();
    let obj = parse_dicom_with(&bytes, ParseOptions::default()).unwrap();
    assert_eq!(obj.view_position().as_deref(), Some("AP"));
}
