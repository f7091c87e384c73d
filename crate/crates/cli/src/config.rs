//! Run configuration, read from TOML or JSON (chosen by file extension).
//!
//! ```toml
//! [camera]
//! focal_px = 1500.0
//! tilt_deg = 70.0
//! roll_deg = 1.0
//! image_width = 1920
//! image_height = 1080     # or principal_point = [960.0, 540.0]
//!
//! [heights]
//! avg_m = 1.7018
//! foot_plane_m = 0.0
//!
//! [ransac]
//! threshold_px = 5.0
//! iterations = 500
//! seed = 0
//!
//! [proximity]
//! tau_m = 4.0
//! sharpness_m = 1.0
//!
//! [eval]
//! gt_threshold_m = 4.0
//! ```
//!
//! Only `camera` is mandatory, and only for commands that calibrate.

use std::fs;
use std::path::Path;

use pedcal_core::calibration::{HeightModel, DEFAULT_AVERAGE_HEIGHT_M};
use pedcal_core::geometry::{CameraIntrinsics, CameraPose, GeometryError, PixelPoint};
use pedcal_core::proximity::NearPredicate;
use pedcal_core::ransac::RansacConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub camera: Option<CameraConfig>,
    #[serde(default)]
    pub heights: HeightsConfig,
    #[serde(default)]
    pub ransac: RansacSection,
    #[serde(default)]
    pub proximity: ProximityConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub focal_px: f64,
    pub tilt_deg: f64,
    pub roll_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeightsConfig {
    pub avg_m: f64,
    pub foot_plane_m: f64,
}

impl Default for HeightsConfig {
    fn default() -> Self {
        Self {
            avg_m: DEFAULT_AVERAGE_HEIGHT_M,
            foot_plane_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacSection {
    pub threshold_px: f64,
    pub iterations: usize,
    pub seed: u64,
    pub min_inliers: usize,
}

impl Default for RansacSection {
    fn default() -> Self {
        let d = RansacConfig::default();
        Self {
            threshold_px: d.inlier_threshold_px,
            iterations: d.iterations,
            seed: d.rng_seed,
            min_inliers: d.min_inliers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityConfig {
    pub tau_m: f64,
    pub sharpness_m: f64,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        let d = NearPredicate::default();
        Self {
            tau_m: d.threshold_m(),
            sharpness_m: d.sharpness_m(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gt_threshold_m: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gt_threshold_m: 4.0,
        }
    }
}

/// Deserializes a TOML or JSON document; errors name the offending field
/// path.
pub fn parse_document<T: DeserializeOwned>(text: &str, json: bool) -> Result<T, String> {
    fn describe<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> String {
        let path = err.path().to_string();
        if path == "." {
            err.into_inner().to_string()
        } else {
            format!("{path}: {}", err.into_inner())
        }
    }
    if json {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(describe)
    } else {
        let de = toml::Deserializer::parse(text).map_err(|e| e.to_string())?;
        serde_path_to_error::deserialize(de).map_err(describe)
    }
}

/// Reads a document, choosing JSON for a `.json` extension and TOML otherwise.
pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    load_as(path, json)
}

pub fn load_as<T: DeserializeOwned>(path: &Path, json: bool) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_document(&text, json).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        load_document(path)
    }

    pub fn camera(&self) -> Result<&CameraConfig, CliError> {
        self.camera
            .as_ref()
            .ok_or_else(|| CliError::input("camera: missing required section"))
    }

    pub fn height_model(&self) -> Result<HeightModel, CliError> {
        HeightModel::new(self.heights.avg_m, self.heights.foot_plane_m)
            .map_err(|e| CliError::input(format!("heights: {e}")))
    }

    pub fn predicate(&self) -> Result<NearPredicate, CliError> {
        NearPredicate::new(self.proximity.tau_m, self.proximity.sharpness_m)
            .map_err(|e| CliError::input(format!("proximity: {e}")))
    }

    pub fn ransac_config(&self, seed: Option<u64>) -> Result<RansacConfig, CliError> {
        let cfg = RansacConfig {
            inlier_threshold_px: self.ransac.threshold_px,
            iterations: self.ransac.iterations,
            rng_seed: seed.unwrap_or(self.ransac.seed),
            min_inliers: self.ransac.min_inliers,
            ..RansacConfig::default()
        };
        cfg.validate()
            .map_err(|e| CliError::input(format!("ransac: {e}")))?;
        Ok(cfg)
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, CliError> {
        let size = match (self.image_width, self.image_height) {
            (Some(w), Some(h)) => Some((w, h)),
            (None, None) => None,
            _ => {
                return Err(CliError::input(
                    "camera: image_width and image_height must be given together",
                ))
            }
        };
        let pp = match (self.principal_point, size) {
            (Some([u, v]), _) => PixelPoint::new(u, v),
            (None, Some((w, h))) => PixelPoint::new(w / 2.0, h / 2.0),
            (None, None) => {
                return Err(CliError::input(
                    "camera.principal_point: required when the image size is not given",
                ))
            }
        };
        let k = CameraIntrinsics::new(self.focal_px, pp).map_err(camera_error)?;
        if let Some((w, h)) = size {
            k.check_image_bounds(w, h).map_err(camera_error)?;
        }
        Ok(k)
    }

    pub fn pose(&self) -> Result<CameraPose, CliError> {
        CameraPose::new(self.tilt_deg, self.roll_deg).map_err(camera_error)
    }
}

fn camera_error(e: GeometryError) -> CliError {
    let field = match e {
        GeometryError::TiltOutOfRange(_) => "camera.tilt_deg",
        GeometryError::InvalidFocalLength(_) => "camera.focal_px",
        GeometryError::PrincipalPointOutOfBand { .. } => "camera.principal_point",
        _ => "camera",
    };
    CliError::input(format!("{field}: {e}"))
}
