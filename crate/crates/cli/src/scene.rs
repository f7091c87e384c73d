//! Scene description for `simulate` and the truth files it writes.
//!
//! ```toml
//! seed = 7
//! frames = 10
//!
//! [camera]
//! focal_px = 1500.0
//! image_width = 1920
//! image_height = 1080
//! tilt_deg = 70.0
//! roll_deg = 1.0
//! height_m = 8.0
//!
//! [people]
//! count = 40
//! height_mean_m = 1.7018
//! height_std_m = 0.07
//! region = [-15.0, 15.0, 40.0, 80.0]   # x_min, x_max, y_min, y_max
//! pixel_noise_px = 1.0
//! outlier_fraction = 0.2
//!
//! [vehicles]
//! count = 5
//! region = [-15.0, 15.0, 40.0, 80.0]
//! positions = [[0.0, 50.0]]
//! ```

use pedcal_core::calibration::DEFAULT_AVERAGE_HEIGHT_M;
use pedcal_core::simulate::{OutlierKind, Region, SceneSpec, SimCamera};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub frames: u32,
    pub camera: SceneCamera,
    pub people: PeopleSection,
    #[serde(default)]
    pub vehicles: Option<VehicleSection>,
}

fn one() -> u32 {
    1
}

fn default_height() -> f64 {
    DEFAULT_AVERAGE_HEIGHT_M
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneCamera {
    pub focal_px: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub tilt_deg: f64,
    pub roll_deg: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeopleSection {
    pub count: usize,
    #[serde(default = "default_height")]
    pub height_mean_m: f64,
    #[serde(default)]
    pub height_std_m: f64,
    pub region: [f64; 4],
    #[serde(default)]
    pub pixel_noise_px: f64,
    #[serde(default)]
    pub outlier_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    #[serde(default)]
    pub count: usize,
    /// Defaults to the people's region.
    #[serde(default)]
    pub region: Option<[f64; 4]>,
    #[serde(default)]
    pub positions: Vec<[f64; 2]>,
}

fn region(r: [f64; 4]) -> Region {
    Region::new(r[0], r[1], r[2], r[3])
}

impl SceneFile {
    pub fn to_spec(&self, seed: Option<u64>) -> Result<SceneSpec, CliError> {
        let c = &self.camera;
        let camera = SimCamera::new(
            c.focal_px,
            c.image_width,
            c.image_height,
            c.tilt_deg,
            c.roll_deg,
            c.height_m,
        )
        .map_err(|e| CliError::input(format!("camera: {e}")))?;
        let p = &self.people;
        let mut spec = SceneSpec::people(camera, p.count, p.height_mean_m, region(p.region));
        spec.height_std_m = p.height_std_m;
        spec.pixel_noise_std = p.pixel_noise_px;
        spec.outlier_fraction = p.outlier_fraction;
        spec.frames = self.frames;
        spec.rng_seed = seed.unwrap_or(self.seed);
        if let Some(v) = &self.vehicles {
            spec.vehicle_count = v.count;
            spec.vehicle_region = region(v.region.unwrap_or(p.region));
            spec.vehicle_positions = v.positions.iter().map(|&[x, y]| (x, y)).collect();
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthOutlier {
    WrongHeight,
    OffPlane,
}

impl From<OutlierKind> for TruthOutlier {
    fn from(k: OutlierKind) -> Self {
        match k {
            OutlierKind::WrongHeight => TruthOutlier::WrongHeight,
            OutlierKind::OffPlane => TruthOutlier::OffPlane,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPersonRecord {
    pub id: u64,
    pub frame_id: i64,
    pub foot: [f64; 3],
    pub height_m: f64,
    pub outlier: Option<TruthOutlier>,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthVehicleRecord {
    pub id: u64,
    pub centroid: [f64; 3],
    pub visible: bool,
}

/// Everything the simulator knows about a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub seed: u64,
    pub frames: u32,
    pub camera: SceneCamera,
    pub projection: [[f64; 4]; 3],
    pub persons: Vec<TruthPersonRecord>,
    pub vehicles: Vec<TruthVehicleRecord>,
}
