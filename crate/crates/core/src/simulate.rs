//! Synthetic scenes with known camera, people and vehicles.
//!
//! Everything is drawn from a single ChaCha8 stream seeded by
//! [`SceneSpec::rng_seed`], so a spec always produces the same scene.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::calibration::{BoundingBox, PersonDetection};
use crate::geometry::{
    compose_projection, project, CameraIntrinsics, CameraPose, GeometryError, PixelPoint,
    ProjectionMatrix, RotationMatrix, WorldPoint,
};

/// Box width as a fraction of the person's pixel height.
pub const BOX_ASPECT: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(&'static str),
    #[error("no person in the placement region is visible to the camera")]
    EmptyScene,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ground-truth camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimCamera {
    pub intrinsics: CameraIntrinsics,
    pub image_width: f64,
    pub image_height: f64,
    pub pose: CameraPose,
    pub camera_height_m: f64,
}

impl SimCamera {
    pub fn new(
        focal_length_px: f64,
        image_width: f64,
        image_height: f64,
        tilt_deg: f64,
        roll_deg: f64,
        camera_height_m: f64,
    ) -> Result<Self, SceneError> {
        if !(image_width > 0.0 && image_height > 0.0) {
            return Err(SceneError::InvalidSpec("image size must be positive"));
        }
        let intrinsics = CameraIntrinsics::centered(focal_length_px, image_width, image_height)?;
        let pose = CameraPose::new(tilt_deg, roll_deg)?.with_height(camera_height_m)?;
        Ok(Self {
            intrinsics,
            image_width,
            image_height,
            pose,
            camera_height_m,
        })
    }

    pub fn rotation(&self) -> RotationMatrix {
        self.pose.rotation()
    }

    pub fn projection(&self) -> Result<ProjectionMatrix, GeometryError> {
        compose_projection(&self.intrinsics, &self.rotation(), self.camera_height_m)
    }

    /// Depth along the optical axis; positive in front of the camera.
    pub fn depth(&self, p: &WorldPoint) -> f64 {
        let rel = p.to_vector() - WorldPoint::new(0.0, 0.0, self.camera_height_m).to_vector();
        self.rotation().optical_axis().dot(&rel)
    }

    pub fn contains(&self, px: &PixelPoint) -> bool {
        (0.0..=self.image_width).contains(&px.u) && (0.0..=self.image_height).contains(&px.v)
    }
}

/// Axis-aligned rectangle on the ground, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let x = self.x_min + (self.x_max - self.x_min) * rng.random::<f64>();
        let y = self.y_min + (self.y_max - self.y_min) * rng.random::<f64>();
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub camera: SimCamera,
    pub person_count: usize,
    pub height_mean_m: f64,
    pub height_std_m: f64,
    pub person_region: Region,
    /// Randomly placed vehicles.
    pub vehicle_count: usize,
    pub vehicle_region: Region,
    /// Vehicles at fixed ground positions, added after the random ones.
    pub vehicle_positions: Vec<(f64, f64)>,
    /// People are spread round-robin over this many frames; vehicles are
    /// parked and present in every frame.
    pub frames: u32,
    /// Standard deviation of the Gaussian noise on each keypoint coordinate.
    pub pixel_noise_std: f64,
    /// Fraction of people replaced by off-model objects.
    pub outlier_fraction: f64,
    pub rng_seed: u64,
}

impl SceneSpec {
    /// A scene with `person_count` noiseless people of exactly `height_m`,
    /// no vehicles and no outliers.
    pub fn people(camera: SimCamera, person_count: usize, height_m: f64, region: Region) -> Self {
        Self {
            camera,
            person_count,
            height_mean_m: height_m,
            height_std_m: 0.0,
            person_region: region,
            vehicle_count: 0,
            vehicle_region: region,
            vehicle_positions: Vec::new(),
            frames: 1,
            pixel_noise_std: 0.0,
            outlier_fraction: 0.0,
            rng_seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.height_mean_m.is_finite() && self.height_mean_m > 0.0) {
            return Err(SceneError::InvalidSpec("height mean must be positive"));
        }
        if !(self.height_std_m.is_finite() && self.height_std_m >= 0.0) {
            return Err(SceneError::InvalidSpec("height std must be non-negative"));
        }
        if self.camera.camera_height_m <= self.height_mean_m + 5.0 * self.height_std_m {
            return Err(SceneError::InvalidSpec(
                "camera must sit above every person",
            ));
        }
        if !(self.pixel_noise_std.is_finite() && self.pixel_noise_std >= 0.0) {
            return Err(SceneError::InvalidSpec("pixel noise must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(SceneError::InvalidSpec(
                "outlier fraction must lie in [0, 1)",
            ));
        }
        if !(self.person_region.is_valid() && self.vehicle_region.is_valid()) {
            return Err(SceneError::InvalidSpec(
                "placement regions must be ordered and finite",
            ));
        }
        if self.frames == 0 {
            return Err(SceneError::InvalidSpec("frames must be at least 1"));
        }
        if !self
            .vehicle_positions
            .iter()
            .all(|(x, y)| x.is_finite() && y.is_finite())
        {
            return Err(SceneError::InvalidSpec("vehicle positions must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierKind {
    /// Height far from the prior (children, poles).
    WrongHeight,
    /// Standing on a step or in a dip, `±0.5 m` off the ground plane.
    OffPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPerson {
    pub id: usize,
    pub frame_id: i64,
    pub foot: WorldPoint,
    pub height_m: f64,
    pub outlier: Option<OutlierKind>,
    /// Index into [`SyntheticScene::detections`] when visible.
    pub detection_index: Option<usize>,
}

impl TruthPerson {
    pub fn head(&self) -> WorldPoint {
        WorldPoint::new(self.foot.x, self.foot.y, self.foot.z + self.height_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthVehicle {
    pub id: usize,
    pub centroid: WorldPoint,
    /// Index into [`SyntheticScene::vehicle_pixels`] when visible.
    pub pixel_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub camera: SimCamera,
    pub projection: ProjectionMatrix,
    pub persons: Vec<TruthPerson>,
    pub vehicles: Vec<TruthVehicle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub detections: Vec<PersonDetection>,
    /// Truth person index for each detection.
    pub detection_person: Vec<usize>,
    /// Projected ground centroid of each visible vehicle.
    pub vehicle_pixels: Vec<PixelPoint>,
    /// Boxes centered on `vehicle_pixels`.
    pub vehicle_boxes: Vec<BoundingBox>,
    /// Truth vehicle index for each visible vehicle.
    pub vehicle_ids: Vec<usize>,
    pub truth: SceneTruth,
}

impl SyntheticScene {
    pub fn detection_truth(&self, detection: usize) -> &TruthPerson {
        &self.truth.persons[self.detection_person[detection]]
    }

    pub fn is_outlier(&self, detection: usize) -> bool {
        self.detection_truth(detection).outlier.is_some()
    }
}

pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene, SceneError> {
    spec.validate()?;
    let camera = spec.camera;
    let projection = camera.projection()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let heights = Normal::new(spec.height_mean_m, spec.height_std_m)
        .map_err(|_| SceneError::InvalidSpec("height distribution"))?;
    let noise = Normal::new(0.0, spec.pixel_noise_std)
        .map_err(|_| SceneError::InvalidSpec("pixel noise"))?;

    let mut persons = Vec::with_capacity(spec.person_count);
    let mut detections = Vec::new();
    let mut detection_person = Vec::new();
    for id in 0..spec.person_count {
        let (x, y) = spec.person_region.sample(&mut rng);
        let mut height_m = heights.sample(&mut rng);
        let mut foot = WorldPoint::new(x, y, 0.0);
        let outlier = if rng.random::<f64>() < spec.outlier_fraction {
            if rng.random::<bool>() {
                height_m = rng.random_range(0.5..=3.0);
                Some(OutlierKind::WrongHeight)
            } else {
                foot.z = if rng.random::<bool>() { 0.5 } else { -0.5 };
                Some(OutlierKind::OffPlane)
            }
        } else {
            None
        };
        let mut jitter = || noise.sample(&mut rng);
        let offsets = [jitter(), jitter(), jitter(), jitter()];
        let frame_id = (id % spec.frames as usize) as i64;

        let mut truth = TruthPerson {
            id,
            frame_id,
            foot,
            height_m,
            outlier,
            detection_index: None,
        };
        if let Some(det) = observe_person(&camera, &projection, &truth, frame_id, offsets) {
            truth.detection_index = Some(detections.len());
            detections.push(det);
            detection_person.push(id);
        }
        persons.push(truth);
    }
    if spec.person_count > 0 && detections.is_empty() {
        return Err(SceneError::EmptyScene);
    }

    let mut vehicles = Vec::new();
    let mut vehicle_pixels = Vec::new();
    let mut vehicle_boxes = Vec::new();
    let mut vehicle_ids = Vec::new();
    let random_vehicles: Vec<(f64, f64)> = (0..spec.vehicle_count)
        .map(|_| spec.vehicle_region.sample(&mut rng))
        .collect();
    for (id, &(x, y)) in random_vehicles
        .iter()
        .chain(spec.vehicle_positions.iter())
        .enumerate()
    {
        let centroid = WorldPoint::new(x, y, 0.0);
        let mut truth = TruthVehicle {
            id,
            centroid,
            pixel_index: None,
        };
        if let Some((px, bbox)) = observe_vehicle(&camera, &projection, &centroid) {
            truth.pixel_index = Some(vehicle_pixels.len());
            vehicle_pixels.push(px);
            vehicle_boxes.push(bbox);
            vehicle_ids.push(id);
        }
        vehicles.push(truth);
    }

    Ok(SyntheticScene {
        detections,
        detection_person,
        vehicle_pixels,
        vehicle_boxes,
        vehicle_ids,
        truth: SceneTruth {
            camera,
            projection,
            persons,
            vehicles,
        },
    })
}

fn observe_person(
    camera: &SimCamera,
    projection: &ProjectionMatrix,
    person: &TruthPerson,
    frame_id: i64,
    offsets: [f64; 4],
) -> Option<PersonDetection> {
    let head_world = person.head();
    if camera.depth(&person.foot) <= 0.0 || camera.depth(&head_world) <= 0.0 {
        return None;
    }
    let foot = project(projection, &person.foot).ok()?;
    let head = project(projection, &head_world).ok()?;
    if !(camera.contains(&foot) && camera.contains(&head)) {
        return None;
    }
    let foot = PixelPoint::new(foot.u + offsets[0], foot.v + offsets[1]);
    let head = PixelPoint::new(head.u + offsets[2], head.v + offsets[3]);
    let pixel_height = foot.v - head.v;
    let half_width = 0.5 * BOX_ASPECT * pixel_height;
    let bbox = BoundingBox::new(foot.u - half_width, head.v, foot.u + half_width, foot.v).ok()?;
    PersonDetection::with_keypoints(frame_id, bbox, foot, head).ok()
}

/// Nominal car footprint used only to size the cosmetic box.
const VEHICLE_LENGTH_M: f64 = 4.5;
const VEHICLE_HEIGHT_M: f64 = 1.5;

fn observe_vehicle(
    camera: &SimCamera,
    projection: &ProjectionMatrix,
    centroid: &WorldPoint,
) -> Option<(PixelPoint, BoundingBox)> {
    let depth = camera.depth(centroid);
    if depth <= 0.0 {
        return None;
    }
    let px = project(projection, centroid).ok()?;
    if !camera.contains(&px) {
        return None;
    }
    let f = camera.intrinsics.focal_length_px();
    let half_w = 0.5 * f * VEHICLE_LENGTH_M / depth;
    let half_h = 0.5 * f * VEHICLE_HEIGHT_M / depth;
    let bbox = BoundingBox::new(px.u - half_w, px.v - half_h, px.u + half_w, px.v + half_h).ok()?;
    Some((px, bbox))
}
