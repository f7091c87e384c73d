//! Robust camera height estimation by random sample consensus.
//!
//! Each iteration fits the vertical-constrained system to a small random set
//! of people and scores every detection by how far its predicted head lands
//! from the observed head pixel (see [`reprojection_error`]). The winning
//! model is refit on its inliers until the inlier set stops changing.
//!
//! Iteration `i` draws its sample from a ChaCha8 generator seeded with
//! `rng_seed` on stream `i`, so every iteration is reproducible on its own.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calibration::{
    calibrate, CalibrationError, CalibrationOptions, CalibrationSolution, Formulation, HeightModel,
    PersonDetection, DEFAULT_MIN_BOX_HEIGHT_PX,
};
use crate::geometry::{
    backproject_to_plane, project, CameraIntrinsics, CameraPose, ProjectionMatrix, WorldPoint,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RansacError {
    #[error("invalid RANSAC configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("need at least {needed} usable detections, got {got}")]
    TooFewDetections { needed: usize, got: usize },
    #[error("no model reached the minimum inlier count")]
    Consensus {
        best: Option<Box<ConsensusCandidate>>,
    },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Best model seen by a run that failed to reach consensus.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusCandidate {
    pub camera_height_m: f64,
    pub inlier_count: usize,
    pub inlier_mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub inlier_threshold_px: f64,
    pub iterations: usize,
    /// People per minimal sample.
    pub sample_size: usize,
    pub min_inliers: usize,
    pub rng_seed: u64,
    /// When set, stop once the standard stopping rule says this probability
    /// of having drawn an all-inlier sample is reached.
    pub confidence: Option<f64>,
    pub max_refit_rounds: usize,
    pub min_box_height_px: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold_px: 5.0,
            iterations: 500,
            sample_size: 2,
            min_inliers: 4,
            rng_seed: 0,
            confidence: None,
            max_refit_rounds: 10,
            min_box_height_px: DEFAULT_MIN_BOX_HEIGHT_PX,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), RansacError> {
        if !(self.inlier_threshold_px.is_finite() && self.inlier_threshold_px > 0.0) {
            return Err(RansacError::InvalidConfig(
                "inlier threshold must be positive",
            ));
        }
        if self.iterations == 0 {
            return Err(RansacError::InvalidConfig("iterations must be positive"));
        }
        if self.sample_size == 0 {
            return Err(RansacError::InvalidConfig("sample size must be positive"));
        }
        if self.min_inliers < self.sample_size {
            return Err(RansacError::InvalidConfig(
                "min inliers must be at least the sample size",
            ));
        }
        if let Some(c) = self.confidence {
            if !(c > 0.0 && c < 1.0) {
                return Err(RansacError::InvalidConfig("confidence must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    /// Fit on the final inlier set.
    pub solution: CalibrationSolution,
    pub inlier_mask: Vec<bool>,
    pub per_detection_error_px: Vec<f64>,
    pub iterations_run: usize,
    pub refit_rounds: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.solution.projection
    }
}

/// Pixel distance between the observed head and the head predicted by
/// dropping the foot pixel onto the foot plane and raising it to the average
/// height. Infinite when the foot ray misses the plane.
pub fn reprojection_error(
    p: &ProjectionMatrix,
    det: &PersonDetection,
    heights: &HeightModel,
) -> f64 {
    let Ok(foot) = backproject_to_plane(p, &det.foot_px, heights.foot_plane_m()) else {
        return f64::INFINITY;
    };
    let head = WorldPoint::new(foot.x, foot.y, heights.avg_height_m());
    match project(p, &head) {
        Ok(px) => px.distance(&det.head_px),
        Err(_) => f64::INFINITY,
    }
}

struct Scored {
    solution: CalibrationSolution,
    errors: Vec<f64>,
    mask: Vec<bool>,
    count: usize,
    rms: f64,
}

fn score(
    solution: CalibrationSolution,
    detections: &[PersonDetection],
    eligible: &[bool],
    heights: &HeightModel,
    threshold: f64,
) -> Scored {
    let errors: Vec<f64> = detections
        .iter()
        .map(|d| reprojection_error(&solution.projection, d, heights))
        .collect();
    let mask: Vec<bool> = errors
        .iter()
        .zip(eligible)
        .map(|(&e, &ok)| ok && e <= threshold)
        .collect();
    let (count, sq) = errors
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .fold((0usize, 0.0), |(n, s), (e, _)| (n + 1, s + e * e));
    let rms = if count > 0 {
        libm::sqrt(sq / count as f64)
    } else {
        f64::INFINITY
    };
    Scored {
        solution,
        errors,
        mask,
        count,
        rms,
    }
}

fn fit(
    detections: &[PersonDetection],
    indices: impl Iterator<Item = usize>,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    heights: &HeightModel,
) -> Result<CalibrationSolution, CalibrationError> {
    let subset: Vec<PersonDetection> = indices.map(|i| detections[i]).collect();
    let options = CalibrationOptions {
        formulation: Formulation::VerticalConstrained,
        // Eligibility was already decided by the caller.
        min_box_height_px: 0.0,
    };
    calibrate(&subset, intrinsics, pose, heights, &options)
}

fn required_iterations(confidence: f64, inlier_ratio: f64, sample_size: usize) -> usize {
    let all_inliers = libm::pow(inlier_ratio, sample_size as f64);
    if all_inliers >= 1.0 {
        return 1;
    }
    if all_inliers <= 0.0 {
        return usize::MAX;
    }
    let n = libm::log(1.0 - confidence) / libm::log(1.0 - all_inliers);
    if n.is_finite() && n >= 0.0 {
        libm::ceil(n) as usize
    } else {
        usize::MAX
    }
}

pub fn ransac_calibrate(
    detections: &[PersonDetection],
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    heights: &HeightModel,
    cfg: &RansacConfig,
) -> Result<RansacResult, RansacError> {
    cfg.validate()?;
    let eligible: Vec<bool> = detections
        .iter()
        .map(|d| d.box_height_px() >= cfg.min_box_height_px)
        .collect();
    let pool: Vec<usize> = (0..detections.len()).filter(|&i| eligible[i]).collect();
    if pool.len() < cfg.sample_size {
        return Err(RansacError::TooFewDetections {
            needed: cfg.sample_size,
            got: pool.len(),
        });
    }
    let threshold = cfg.inlier_threshold_px;

    let mut best: Option<Scored> = None;
    let mut budget = cfg.iterations;
    let mut iterations_run = 0;
    for iteration in 0..cfg.iterations {
        if iteration >= budget {
            break;
        }
        iterations_run += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(iteration as u64);
        let mut sample = index::sample(&mut rng, pool.len(), cfg.sample_size).into_vec();
        sample.sort_unstable();
        let Ok(model) = fit(
            detections,
            sample.iter().map(|&k| pool[k]),
            intrinsics,
            pose,
            heights,
        ) else {
            continue;
        };
        let candidate = score(model, detections, &eligible, heights, threshold);
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.count > b.count || (candidate.count == b.count && candidate.rms < b.rms)
            }
        };
        if better {
            if let Some(c) = cfg.confidence {
                let ratio = candidate.count as f64 / pool.len() as f64;
                budget = budget.min(required_iterations(c, ratio, cfg.sample_size));
            }
            best = Some(candidate);
        }
    }

    let mut current = match best {
        Some(b) if b.count >= cfg.min_inliers => b,
        other => {
            return Err(RansacError::Consensus {
                best: other.map(|b| {
                    Box::new(ConsensusCandidate {
                        camera_height_m: b.solution.camera_height_m,
                        inlier_count: b.count,
                        inlier_mask: b.mask,
                    })
                }),
            })
        }
    };

    let mut refit_rounds = 0;
    for _ in 0..cfg.max_refit_rounds {
        let inliers = current
            .mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i);
        let Ok(model) = fit(detections, inliers, intrinsics, pose, heights) else {
            break;
        };
        let refit = score(model, detections, &eligible, heights, threshold);
        if refit.count < cfg.min_inliers {
            break;
        }
        refit_rounds += 1;
        let converged = refit.mask == current.mask;
        current = refit;
        if converged {
            break;
        }
    }

    Ok(RansacResult {
        solution: current.solution,
        inlier_mask: current.mask,
        per_detection_error_px: current.errors,
        iterations_run,
        refit_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::BoundingBox;
    use crate::geometry::{compose_projection, PixelPoint};
    use crate::simulate::{generate, Region, SceneSpec, SimCamera};

    fn camera() -> SimCamera {
        SimCamera::new(1500.0, 1920.0, 1080.0, 70.0, 1.0, 8.0).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = RansacConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.min_inliers = 1;
        assert!(cfg.validate().is_err());
        let cfg = RansacConfig {
            inlier_threshold_px: 0.0,
            ..RansacConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RansacConfig {
            confidence: Some(1.0),
            ..RansacConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn horizon_foot_is_infinite() {
        let cam = camera();
        let p = compose_projection(&cam.intrinsics, &cam.rotation(), 8.0).unwrap();
        let [l0, l1, l2] = p.horizon_line().unwrap();
        let u = 960.0;
        let v = -(l0 * u + l2) / l1;
        let bbox = BoundingBox::new(u - 10.0, v - 40.0, u + 10.0, v).unwrap();
        let det =
            PersonDetection::with_keypoints(0, bbox, PixelPoint::new(u, v), bbox.top_center())
                .unwrap();
        assert_eq!(
            reprojection_error(&p, &det, &HeightModel::default()),
            f64::INFINITY
        );
    }

    #[test]
    fn too_few_detections() {
        let cam = camera();
        let scene = generate(&SceneSpec::people(
            cam,
            1,
            1.7018,
            Region::new(-1.0, 1.0, 10.0, 11.0),
        ))
        .unwrap();
        let err = ransac_calibrate(
            &scene.detections,
            &cam.intrinsics,
            &cam.pose,
            &HeightModel::default(),
            &RansacConfig::default(),
        );
        assert_eq!(
            err,
            Err(RansacError::TooFewDetections { needed: 2, got: 1 })
        );
    }

    #[test]
    fn consensus_failure_carries_candidate() {
        let cam = camera();
        let mut spec = SceneSpec::people(cam, 12, 1.7018, Region::new(-8.0, 8.0, 10.0, 30.0));
        spec.height_std_m = 0.3;
        spec.pixel_noise_std = 4.0;
        spec.rng_seed = 3;
        let scene = generate(&spec).unwrap();
        let cfg = RansacConfig {
            inlier_threshold_px: 0.01,
            iterations: 50,
            min_inliers: 10,
            ..RansacConfig::default()
        };
        match ransac_calibrate(
            &scene.detections,
            &cam.intrinsics,
            &cam.pose,
            &HeightModel::default(),
            &cfg,
        ) {
            Err(RansacError::Consensus { best: Some(best) }) => {
                assert!(best.inlier_count < 10);
                assert_eq!(best.inlier_mask.len(), scene.detections.len());
            }
            other => panic!("expected consensus failure, got {other:?}"),
        }
    }

    #[test]
    fn adaptive_exit_stops_early_on_clean_data() {
        let cam = camera();
        let scene = generate(&SceneSpec::people(
            cam,
            25,
            1.7018,
            Region::new(-8.0, 8.0, 10.0, 30.0),
        ))
        .unwrap();
        let cfg = RansacConfig {
            confidence: Some(0.99),
            ..RansacConfig::default()
        };
        let res = ransac_calibrate(
            &scene.detections,
            &cam.intrinsics,
            &cam.pose,
            &HeightModel::default(),
            &cfg,
        )
        .unwrap();
        assert!(res.iterations_run < 5);
        assert_eq!(res.inlier_count(), scene.detections.len());
    }
}
