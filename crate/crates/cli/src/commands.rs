//! The subcommands as functions over parsed inputs. File handling lives in
//! [`crate::run`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pedcal_core::alignment::{correspondence_errors, fit_rigid, fit_similarity, AlignmentError};
use pedcal_core::calibration::PersonDetection;
use pedcal_core::evaluation::{label_pairs, roc_auc, EvaluationError, LabeledPair, RocCurve};
use pedcal_core::geometry::{backproject_to_plane, ProjectionMatrix, WorldPoint};
use pedcal_core::proximity::{NearPredicate, ProximityObservation};
use pedcal_core::ransac::{ransac_calibrate, RansacError};
use pedcal_core::simulate::{generate, SceneError};

use crate::config::{EvalConfig, RunConfig};
use crate::error::CliError;
use crate::records::{
    Detection, DetectionRecord, ObjectClass, PairRecord, PositionRecord, PositionStatus,
};
use crate::report::{
    AlignedPoint, AlignmentReport, CalibratedRecord, CalibrationReport, ProximityPair,
    ProximityReport,
};
use crate::scene::{SceneFile, TruthFile, TruthPersonRecord, TruthVehicleRecord};

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn calibrate(
    detections: &[Detection],
    config: &RunConfig,
    seed: Option<u64>,
) -> Result<CalibrationReport, CliError> {
    let camera = config.camera()?;
    let intrinsics = camera.intrinsics()?;
    let pose = camera.pose()?;
    let heights = config.height_model()?;
    let ransac = config.ransac_config(seed)?;

    let persons: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.class == ObjectClass::Person)
        .collect();
    let person_dets: Vec<PersonDetection> = persons
        .iter()
        .map(|d| PersonDetection::from_bbox(d.frame_id, d.bbox))
        .collect();
    let result = ransac_calibrate(&person_dets, &intrinsics, &pose, &heights, &ransac).map_err(
        |e| match &e {
            RansacError::InvalidConfig(_) | RansacError::TooFewDetections { .. } => {
                CliError::input(e.to_string())
            }
            RansacError::Consensus { best: Some(b) } => CliError::failure(format!(
                "{e}: best model had {} inliers at camera height {:.3} m",
                b.inlier_count, b.camera_height_m
            )),
            _ => CliError::failure(e.to_string()),
        },
    )?;

    let records = persons
        .iter()
        .enumerate()
        .map(|(i, d)| CalibratedRecord {
            id: d.id,
            frame_id: d.frame_id,
            inlier: result.inlier_mask[i],
            reprojection_error_px: finite(result.per_detection_error_px[i]),
        })
        .collect();
    let solution = &result.solution;
    Ok(CalibrationReport {
        camera_height_m: solution.camera_height_m,
        projection: solution.projection.to_rows(),
        camera: camera.clone(),
        heights: config.heights,
        ransac: crate::config::RansacSection {
            seed: ransac.rng_seed,
            ..config.ransac
        },
        iterations_run: result.iterations_run,
        refit_rounds: result.refit_rounds,
        person_count: persons.len(),
        inlier_count: result.inlier_count(),
        residual_rms_px: solution.residual_rms_px,
        system_residual_rms: solution.system_residual_rms,
        condition_number: finite(solution.condition_number),
        records,
    })
}

/// Persons are placed by their box's bottom center on the foot plane,
/// vehicles by their box center on `Z = 0`.
pub fn locate(
    detections: &[Detection],
    calibration: &CalibrationReport,
) -> Result<Vec<PositionRecord>, CliError> {
    let p = ProjectionMatrix::from_rows(calibration.projection)
        .map_err(|e| CliError::input(format!("projection: {e}")))?;
    Ok(detections
        .iter()
        .map(|d| {
            let (pixel, plane) = match d.class {
                ObjectClass::Person => (d.bbox.bottom_center(), calibration.heights.foot_plane_m),
                ObjectClass::Vehicle => (d.bbox.center(), 0.0),
            };
            match backproject_to_plane(&p, &pixel, plane) {
                Ok(w) => PositionRecord::located(d.id, d.frame_id, d.class, [w.x, w.y, w.z]),
                Err(_) => PositionRecord {
                    id: d.id,
                    frame_id: d.frame_id,
                    object_class: d.class,
                    x: None,
                    y: None,
                    z: None,
                    status: PositionStatus::Degenerate,
                },
            }
        })
        .collect())
}

type Key = (i64, u64);

fn ground_index(records: &[PositionRecord]) -> Result<BTreeMap<Key, (f64, f64)>, CliError> {
    let mut map = BTreeMap::new();
    for r in records {
        if let Some(g) = r.ground() {
            if map.insert((r.frame_id, r.id), g).is_some() {
                return Err(CliError::input(format!(
                    "duplicate record id {} in frame {}",
                    r.id, r.frame_id
                )));
            }
        }
    }
    Ok(map)
}

/// Scores every person-vehicle pair sharing a frame. With `truth`, also
/// returns the labeled pairs for which both truth positions are known.
pub fn proximity(
    positions: &[PositionRecord],
    predicate: &NearPredicate,
    truth: Option<&[PositionRecord]>,
) -> Result<(ProximityReport, Vec<PairRecord>), CliError> {
    let mut frames: BTreeMap<i64, (Vec<Key>, Vec<Key>)> = BTreeMap::new();
    let ground = ground_index(positions)?;
    for r in positions.iter().filter(|r| r.ground().is_some()) {
        let entry = frames.entry(r.frame_id).or_default();
        match r.object_class {
            ObjectClass::Person => entry.0.push((r.frame_id, r.id)),
            ObjectClass::Vehicle => entry.1.push((r.frame_id, r.id)),
        }
    }
    let truth = truth.map(ground_index).transpose()?;

    let at = |(x, y): (f64, f64)| WorldPoint::new(x, y, 0.0);
    let mut pairs = Vec::new();
    let mut labeled = Vec::new();
    for (frame_id, (mut persons, mut vehicles)) in frames {
        persons.sort_unstable();
        vehicles.sort_unstable();
        for p in &persons {
            for v in &vehicles {
                let obs = ProximityObservation::new(at(ground[p]), at(ground[v]))
                    .map_err(|e| CliError::input(e.to_string()))?;
                pairs.push(ProximityPair {
                    frame_id,
                    person_id: p.1,
                    vehicle_id: v.1,
                    distance_m: obs.distance_m,
                    p_near: obs.p_near(predicate),
                });
                let Some(truth) = &truth else { continue };
                if let (Some(&tp), Some(&tv)) = (truth.get(p), truth.get(v)) {
                    let gt = ProximityObservation::new(at(tp), at(tv))
                        .map_err(|e| CliError::input(e.to_string()))?;
                    labeled.push(PairRecord {
                        frame_id: Some(frame_id),
                        person_id: Some(p.1),
                        vehicle_id: Some(v.1),
                        gt_distance_m: gt.distance_m,
                        est_distance_m: obs.distance_m,
                    });
                }
            }
        }
    }
    let near_events = pairs.iter().filter(|p| p.p_near >= 0.5).cloned().collect();
    Ok((
        ProximityReport {
            tau_m: predicate.threshold_m(),
            sharpness_m: predicate.sharpness_m(),
            pairs,
            near_events,
        },
        labeled,
    ))
}

/// Registers estimated ground positions onto the truth, matching records by
/// frame and id.
pub fn align(
    estimated: &[PositionRecord],
    truth: &[PositionRecord],
    class: Option<ObjectClass>,
) -> Result<AlignmentReport, CliError> {
    let truth_index = ground_index(truth)?;
    let mut keys = Vec::new();
    let mut source = Vec::new();
    let mut target = Vec::new();
    let mut unmatched = 0;
    for r in estimated {
        if class.is_some_and(|c| c != r.object_class) {
            continue;
        }
        let key = (r.frame_id, r.id);
        match (r.ground(), truth_index.get(&key)) {
            (Some((x, y)), Some(&(tx, ty))) => {
                keys.push(key);
                source.push(WorldPoint::new(x, y, 0.0));
                target.push(WorldPoint::new(tx, ty, 0.0));
            }
            _ => unmatched += 1,
        }
    }
    if source.len() < 3 {
        return Err(CliError::failure(format!(
            "need at least 3 correspondences, found {}",
            source.len()
        )));
    }
    let transform = fit_rigid(&source, &target).map_err(|e| match &e {
        AlignmentError::Collinear => CliError::failure(e.to_string()),
        _ => CliError::input(e.to_string()),
    })?;
    let report = correspondence_errors(&transform, &source, &target)
        .map_err(|e| CliError::failure(e.to_string()))?;
    let similarity_scale = fit_similarity(&source, &target).ok().map(|s| s.scale);
    let r = transform.rotation.matrix();
    let t = transform.translation;
    Ok(AlignmentReport {
        count: source.len(),
        unmatched,
        rotation: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        translation: [t.x, t.y, t.z],
        mean_error_m: report.mean_error_m,
        std_error_m: report.std_error_m,
        max_error_m: report.max_error_m,
        similarity_scale,
        per_point: keys
            .iter()
            .zip(&report.per_point_error_m)
            .map(|(&(frame_id, id), &error_m)| AlignedPoint {
                frame_id,
                id,
                error_m,
            })
            .collect(),
    })
}

pub fn roc(pairs: &[PairRecord], eval: &EvalConfig) -> Result<RocCurve, CliError> {
    let labeled: Vec<LabeledPair> = pairs
        .iter()
        .map(|p| LabeledPair::new(p.gt_distance_m, p.est_distance_m))
        .collect();
    let set = label_pairs(&labeled, eval.gt_threshold_m).map_err(|e| match e {
        EvaluationError::InvalidDistance { index } => {
            CliError::input(format!("pair {}: invalid distance", index + 1))
        }
        _ => CliError::input(e.to_string()),
    })?;
    roc_auc(&set).map_err(|e| match e {
        EvaluationError::SingleClass { .. } => CliError::failure(e.to_string()),
        _ => CliError::input(e.to_string()),
    })
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in &curve.points {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    out
}

/// Detections, truth sidecar and truth positions for one simulated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub detections: Vec<DetectionRecord>,
    pub truth: TruthFile,
    pub truth_positions: Vec<PositionRecord>,
}

/// Vehicles are parked: each visible vehicle gets one record per frame.
/// Vehicle ids follow the person ids.
pub fn simulate(scene: &SceneFile, seed: Option<u64>) -> Result<Simulation, CliError> {
    let spec = scene.to_spec(seed)?;
    let sim = generate(&spec).map_err(|e| match e {
        SceneError::EmptyScene => CliError::input(format!("{e}; no person is visible")),
        _ => CliError::input(e.to_string()),
    })?;
    let vehicle_base = spec.person_count as u64;

    let mut detections = Vec::new();
    let mut truth_positions = Vec::new();
    for (i, det) in sim.detections.iter().enumerate() {
        let person = sim.detection_truth(i);
        let b = det.bbox;
        detections.push(DetectionRecord {
            id: Some(person.id as u64),
            frame_id: det.frame_id,
            object_class: ObjectClass::Person,
            left: b.left,
            top: b.top,
            right: b.right,
            bottom: b.bottom,
        });
        truth_positions.push(PositionRecord::located(
            person.id as u64,
            det.frame_id,
            ObjectClass::Person,
            [person.foot.x, person.foot.y, person.foot.z],
        ));
    }
    for frame_id in 0..i64::from(spec.frames) {
        for (b, &vid) in sim.vehicle_boxes.iter().zip(&sim.vehicle_ids) {
            let id = vehicle_base + vid as u64;
            detections.push(DetectionRecord {
                id: Some(id),
                frame_id,
                object_class: ObjectClass::Vehicle,
                left: b.left,
                top: b.top,
                right: b.right,
                bottom: b.bottom,
            });
            let c = sim.truth.vehicles[vid].centroid;
            truth_positions.push(PositionRecord::located(
                id,
                frame_id,
                ObjectClass::Vehicle,
                [c.x, c.y, c.z],
            ));
        }
    }

    let truth = TruthFile {
        seed: spec.rng_seed,
        frames: spec.frames,
        camera: scene.camera,
        projection: sim.truth.projection.to_rows(),
        persons: sim
            .truth
            .persons
            .iter()
            .map(|p| TruthPersonRecord {
                id: p.id as u64,
                frame_id: p.frame_id,
                foot: [p.foot.x, p.foot.y, p.foot.z],
                height_m: p.height_m,
                outlier: p.outlier.map(Into::into),
                visible: p.detection_index.is_some(),
            })
            .collect(),
        vehicles: sim
            .truth
            .vehicles
            .iter()
            .map(|v| TruthVehicleRecord {
                id: vehicle_base + v.id as u64,
                centroid: [v.centroid.x, v.centroid.y, v.centroid.z],
                visible: v.pixel_index.is_some(),
            })
            .collect(),
    };
    Ok(Simulation {
        detections,
        truth,
        truth_positions,
    })
}
