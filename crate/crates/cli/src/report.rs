//! JSON reports written by the subcommands.

use serde::{Deserialize, Serialize};

use crate::config::{CameraConfig, HeightsConfig, RansacSection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub camera_height_m: f64,
    /// Rows of the 3×4 projection matrix.
    pub projection: [[f64; 4]; 3],
    pub camera: CameraConfig,
    pub heights: HeightsConfig,
    pub ransac: RansacSection,
    pub iterations_run: usize,
    pub refit_rounds: usize,
    pub person_count: usize,
    pub inlier_count: usize,
    /// Pixel RMS of the inliers' head reprojection error.
    pub residual_rms_px: f64,
    pub system_residual_rms: f64,
    pub condition_number: Option<f64>,
    /// Person records in input order.
    pub records: Vec<CalibratedRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedRecord {
    pub id: u64,
    pub frame_id: i64,
    pub inlier: bool,
    /// Absent when the foot pixel does not reach the ground.
    pub reprojection_error_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityPair {
    pub frame_id: i64,
    pub person_id: u64,
    pub vehicle_id: u64,
    pub distance_m: f64,
    pub p_near: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityReport {
    pub tau_m: f64,
    pub sharpness_m: f64,
    pub pairs: Vec<ProximityPair>,
    /// Pairs with `p_near >= 0.5`.
    pub near_events: Vec<ProximityPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPoint {
    pub frame_id: i64,
    pub id: u64,
    pub error_m: f64,
}

/// Rigid registration of estimated onto true ground positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub count: usize,
    /// Estimated records without a usable truth counterpart.
    pub unmatched: usize,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub mean_error_m: f64,
    pub std_error_m: f64,
    pub max_error_m: f64,
    /// Scale of the best similarity fit; far from 1 means a metric scale error.
    pub similarity_scale: Option<f64>,
    pub per_point: Vec<AlignedPoint>,
}
