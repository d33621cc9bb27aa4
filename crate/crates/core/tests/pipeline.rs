use std::sync::Arc;

use adawave::denoise::{threshold_pyramid, ThresholdRule};
use adawave::glm::{Contrast, DesignMatrix};
use adawave::hierarchy::GridHierarchy;
use adawave::linear::LinearBasis;
use adawave::phantom::gaussian_noise;
use adawave::vxl::{load_mask, load_series_on, load_volume_on, save_mask, save_series, save_volume};
use adawave::wspm::{wspm_detect, compute_thresholds};
use adawave::{build_hierarchy, make_ring_domain, CoefficientPyramid, DiscreteDomain, LiftingTransform, Stage, TransformOptions, Volume};
use proptest::prelude::*;

fn ring() -> Arc<DiscreteDomain> {
    Arc::new(make_ring_domain(&[(2.0, 6.5)], 16).unwrap())
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let d = ring();
    save_mask(dir.path().join("m.vxl"), &d).unwrap();
    let back = Arc::new(load_mask(dir.path().join("m.vxl")).unwrap());
    assert_eq!(back.voxels(), d.voxels());

    let h = build_hierarchy(back.clone(), 3, 11, 3).unwrap();
    let text = h.to_text();
    let again = GridHierarchy::from_text(back.clone(), &text).unwrap();
    assert_eq!(again.content_hash(), h.content_hash());

    let t = LiftingTransform::new(Arc::new(again), TransformOptions::new(Stage::AverageInterpolating, 3).normalized()).unwrap();
    let v = Volume::new(back.clone(), gaussian_noise(back.len(), 1.0, 2)).unwrap();
    save_volume(dir.path().join("v.vxl"), &v).unwrap();
    let v = load_volume_on(dir.path().join("v.vxl"), back.clone()).unwrap();
    let p = t.forward(&v).unwrap();
    p.write(dir.path().join("p.pyr")).unwrap();
    let q = CoefficientPyramid::read(dir.path().join("p.pyr")).unwrap();
    assert_eq!(p, q);
    let r = t.inverse(&q).unwrap();
    assert!(v.distance(&r) < 1e-12 * v.norm());
}

#[test]
fn series_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = ring();
    let frames: Vec<Vec<f64>> = (0..4).map(|i| gaussian_noise(d.len(), 1.0, i)).collect();
    save_series(dir.path().join("s.vxl"), &d, &frames).unwrap();
    assert_eq!(load_series_on(dir.path().join("s.vxl"), &d).unwrap(), frames);
}

/// Orthonormal Haar: hard thresholding keeps the best subset of each size.
#[test]
fn thresholding_is_best_subset_for_orthonormal_haar() {
    let d = Arc::new(make_ring_domain(&[(1.0, 2.6)], 7).unwrap());
    assert!(d.len() <= 64);
    let h = Arc::new(build_hierarchy(d.clone(), 2, 3, 1).unwrap());
    let t = LiftingTransform::new(h, TransformOptions::new(Stage::Haar, 2).normalized()).unwrap();
    let v = Volume::new(d.clone(), gaussian_noise(d.len(), 1.0, 5)).unwrap();
    let p = t.forward(&v).unwrap();
    let details: Vec<f64> = p.details.iter().flatten().copied().collect();
    let n = details.len();
    assert!(n <= 16, "{n} details is too many for exhaustive search");
    let mut sorted: Vec<f64> = details.iter().map(|g| g.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for size in 1..n {
        let tau = 0.5 * (sorted[size - 1] + sorted[size]);
        let (kept, survivors) = threshold_pyramid(&p, &ThresholdRule::details(tau).unwrap());
        assert_eq!(survivors.len(), size);
        let err = v.distance(&t.inverse(&kept).unwrap());
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut q = p.clone();
            let mut i = 0;
            for level in &mut q.details {
                for g in level.iter_mut() {
                    if mask & (1 << i) == 0 {
                        *g = 0.0;
                    }
                    i += 1;
                }
            }
            best = best.min(v.distance(&t.inverse(&q).unwrap()));
        }
        assert!(err <= best + 1e-12, "size {size}: {err} > {best}");
    }
}

#[test]
fn strong_signal_is_detected() {
    let d = ring();
    let h = Arc::new(build_hierarchy(d.clone(), 2, 4, 3).unwrap());
    let t = LiftingTransform::new(h, TransformOptions::new(Stage::Haar, 2).normalized()).unwrap();
    let design = DesignMatrix::block_design(40, 5, 5).unwrap();
    let c = Contrast::select(3, 2).unwrap();
    let truth: Vec<bool> = d.voxels().iter().map(|v| v.x < 8).collect();
    let frames: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let on = design.matrix()[(i, 2)];
            gaussian_noise(d.len(), 0.2, 500 + i as u64)
                .iter()
                .zip(&truth)
                .map(|(e, &a)| e + if a { 3.0 * on } else { 0.0 })
                .collect()
        })
        .collect();
    let map = wspm_detect(&frames, &design, &c, &t, 0.001).unwrap();
    let hits = map.detected.iter().zip(&truth).filter(|(d, t)| **d && **t).count();
    let positives = truth.iter().filter(|t| **t).count();
    assert!(hits as f64 >= 0.9 * positives as f64, "{hits}/{positives}");
    assert!(map.detected.len() == d.len());
    assert!(compute_thresholds(0.001).unwrap().tau_w > 3.0);
}

#[test]
fn transforms_are_linear_bases() {
    let d = ring();
    let h = Arc::new(build_hierarchy(d.clone(), 3, 1, 2).unwrap());
    let t = LiftingTransform::new(h, TransformOptions::new(Stage::AverageInterpolating, 3)).unwrap();
    let x = gaussian_noise(d.len(), 1.0, 8);
    let back = t.synthesize(&t.analyze(&x).unwrap()).unwrap();
    for (a, b) in x.iter().zip(&back) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_on_random_rings(inner in 0.0f64..4.0, width in 1.5f64..5.0, levels in 1usize..5, seed in any::<u64>(), p in 1usize..5, stage in 0usize..4) {
        let d = Arc::new(make_ring_domain(&[(inner, inner + width)], 20).unwrap());
        let stage = [Stage::Lazy, Stage::Predict, Stage::Haar, Stage::AverageInterpolating][stage];
        let h = Arc::new(build_hierarchy(d.clone(), levels, seed, p).unwrap());
        let t = LiftingTransform::new(h, TransformOptions::new(stage, levels).normalized()).unwrap();
        let v = Volume::new(d.clone(), gaussian_noise(d.len(), 1.0, seed)).unwrap();
        let r = t.inverse(&t.forward(&v).unwrap()).unwrap();
        prop_assert!(v.distance(&r) <= 1e-9 * v.norm());
    }

    #[test]
    fn same_seed_same_hierarchy(seed in any::<u64>()) {
        let d = ring();
        let a = build_hierarchy(d.clone(), 3, seed, 3).unwrap();
        let b = build_hierarchy(d, 3, seed, 3).unwrap();
        prop_assert_eq!(a.to_text(), b.to_text());
    }
}
