use pedcal_core::calibration::*;
use pedcal_core::geometry::*;
use pedcal_core::ransac::*;
use pedcal_core::simulate::{generate, Region, SceneSpec, SimCamera, SyntheticScene};

fn camera(roll: f64) -> SimCamera {
    SimCamera::new(1500.0, 1920.0, 1080.0, 70.0, roll, 8.0).unwrap()
}

fn noisy_scene(seed: u64, region: Region, outliers: f64) -> SyntheticScene {
    let mut spec = SceneSpec::people(camera(1.0), 30, 1.7018, region);
    spec.height_std_m = 0.07;
    spec.pixel_noise_std = 1.0;
    spec.outlier_fraction = outliers;
    spec.rng_seed = seed;
    generate(&spec).unwrap()
}

fn run(
    dets: &[PersonDetection],
    cam: &SimCamera,
    cfg: &RansacConfig,
) -> Result<RansacResult, RansacError> {
    ransac_calibrate(
        dets,
        &cam.intrinsics,
        &cam.pose,
        &HeightModel::default(),
        cfg,
    )
}

/// Detection of a vertical object of `height` standing at (x, y).
fn object(p: &ProjectionMatrix, x: f64, y: f64, height: f64) -> PersonDetection {
    let foot = project(p, &WorldPoint::new(x, y, 0.0)).unwrap();
    let head = project(p, &WorldPoint::new(x, y, height)).unwrap();
    let half = 0.2 * (foot.v - head.v);
    let bbox = BoundingBox::new(foot.u - half, head.v, foot.u + half, foot.v).unwrap();
    PersonDetection::with_keypoints(0, bbox, foot, head).unwrap()
}

#[test]
fn same_seed_same_result() {
    let s = noisy_scene(3, Region::new(-15.0, 15.0, 40.0, 80.0), 0.2);
    let cfg = RansacConfig {
        rng_seed: 77,
        ..RansacConfig::default()
    };
    let a = run(&s.detections, &camera(1.0), &cfg).unwrap();
    let b = run(&s.detections, &camera(1.0), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.solution.camera_height_m.to_bits(),
        b.solution.camera_height_m.to_bits()
    );
}

#[test]
fn final_inliers_respect_threshold() {
    for seed in 0..5 {
        let s = noisy_scene(seed, Region::new(-15.0, 15.0, 40.0, 80.0), 0.2);
        let r = run(&s.detections, &camera(1.0), &RansacConfig::default()).unwrap();
        let h = HeightModel::default();
        for (i, det) in s.detections.iter().enumerate() {
            let e = reprojection_error(r.projection(), det, &h);
            assert_eq!(e, r.per_detection_error_px[i]);
            assert_eq!(r.inlier_mask[i], e <= 5.0);
        }
        assert_eq!(r.solution.detection_indices.len(), r.inlier_count());
    }
}

#[test]
fn looser_threshold_never_loses_inliers() {
    let s = noisy_scene(9, Region::new(-15.0, 15.0, 20.0, 60.0), 0.2);
    let cam = camera(1.0);
    let strict = run(&s.detections, &cam, &RansacConfig::default()).unwrap();
    // Same fixed model, wider band.
    let h = HeightModel::default();
    let loose = s
        .detections
        .iter()
        .filter(|d| reprojection_error(strict.projection(), d, &h) <= 8.0)
        .count();
    assert!(loose >= strict.inlier_count());
    let wide = run(
        &s.detections,
        &cam,
        &RansacConfig {
            inlier_threshold_px: 8.0,
            ..RansacConfig::default()
        },
    )
    .unwrap();
    assert!(wide.inlier_count() >= strict.inlier_count());
}

#[test]
fn clean_scene_is_all_inliers() {
    let mut spec = SceneSpec::people(camera(1.0), 30, 1.7018, Region::new(-8.0, 8.0, 10.0, 35.0));
    spec.rng_seed = 12;
    let s = generate(&spec).unwrap();
    let r = run(&s.detections, &camera(1.0), &RansacConfig::default()).unwrap();
    assert_eq!(r.inlier_count(), s.detections.len());
    assert!((r.solution.camera_height_m - 8.0).abs() / 8.0 < 1e-6);
}

#[test]
fn gross_outliers_are_excluded() {
    let cam = camera(1.0);
    let p = cam.projection().unwrap();
    let mut dets = Vec::new();
    for i in 0..20 {
        dets.push(object(&p, -6.0 + 0.6 * i as f64, 12.0 + i as f64, 1.7018));
    }
    for i in 0..10 {
        let height = if i % 2 == 0 { 1.1 } else { 4.0 };
        dets.push(object(&p, 5.0 - i as f64, 14.0 + 1.5 * i as f64, height));
    }
    let r = run(&dets, &cam, &RansacConfig::default()).unwrap();
    assert!(r.inlier_mask[..20].iter().all(|&m| m));
    assert!(r.inlier_mask[20..].iter().all(|&m| !m));
    assert!((r.solution.camera_height_m - 8.0).abs() / 8.0 < 1e-6);
}

#[test]
fn tall_person_error_grows_with_image_size() {
    let cam = camera(0.0);
    let p = cam.projection().unwrap();
    let h = HeightModel::default();
    let mut last = 0.0;
    // Closer people appear taller in the image.
    for y in [60.0, 40.0, 25.0, 15.0, 10.0] {
        let det = object(&p, 0.0, y, 1.8018);
        let e = reprojection_error(&p, &det, &h);
        assert!(e > last, "y={y}: {e} <= {last}");
        last = e;
    }
}

/// With roll, axis-aligned boxes put the head directly above the foot, so
/// the people whose true vertical is closest to the image vertical (near the
/// vertical vanishing point's column) are the ones that fit.
#[test]
fn rolled_camera_keeps_people_near_vanishing_column() {
    let cam = camera(5.0);
    let p = cam.projection().unwrap();
    let m = p.matrix();
    let vanishing_u = m[(0, 2)] / m[(2, 2)];
    let mut closer = 0;
    for seed in 0..20 {
        let mut spec = SceneSpec::people(cam, 40, 1.7018, Region::new(-20.0, 20.0, 20.0, 60.0));
        spec.rng_seed = seed;
        let s = generate(&spec).unwrap();
        let boxed: Vec<_> = s
            .detections
            .iter()
            .map(|d| PersonDetection::from_bbox(d.frame_id, d.bbox))
            .collect();
        let r = run(&boxed, &cam, &RansacConfig::default()).unwrap();
        let offset = |d: &PersonDetection| (d.foot_px.u - vanishing_u).abs();
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = it.collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let all = mean(&mut boxed.iter().map(offset));
        let inl = mean(
            &mut boxed
                .iter()
                .zip(&r.inlier_mask)
                .filter(|(_, &m)| m)
                .map(|(d, _)| offset(d)),
        );
        if inl < all {
            closer += 1;
        }
    }
    assert!(closer >= 15, "{closer}/20");
}

/// At short range genuine height spread alone pushes many people past the
/// threshold; RANSAC should find about as many inliers as the true camera.
#[test]
fn near_field_inliers_track_true_camera() {
    let h = HeightModel::default();
    let (mut found, mut ceiling, mut genuine) = (0usize, 0usize, 0usize);
    for seed in 0..10 {
        let s = noisy_scene(seed, Region::new(-8.0, 8.0, 10.0, 35.0), 0.2);
        let r = run(&s.detections, &camera(1.0), &RansacConfig::default()).unwrap();
        for (i, det) in s.detections.iter().enumerate() {
            if s.is_outlier(i) {
                continue;
            }
            genuine += 1;
            found += r.inlier_mask[i] as usize;
            ceiling += (reprojection_error(&s.truth.projection, det, &h) <= 5.0) as usize;
        }
    }
    let (f, c) = (
        found as f64 / genuine as f64,
        ceiling as f64 / genuine as f64,
    );
    assert!(c < 0.9, "ceiling {c}");
    assert!((f - c).abs() < 0.1, "found {f} vs ceiling {c}");
}
