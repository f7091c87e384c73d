//! Camera height and person locations from foot/head pixels.
//!
//! Writing the projection of a camera at `(0, 0, C_Z)` with the height-free
//! coefficients `a..l` (see [`ProjectionCoefficients`]), every observed pixel
//! `(u, v)` of a world point at known height `Z` gives two linear equations
//!
//! ```text
//! C_Z (d − u l) + X (a − u i) + Y (b − u j) = Z (u k − c)
//! C_Z (h − v l) + X (e − v i) + Y (f − v j) = Z (v k − g)
//! ```
//!
//! The foot point sits on the plane `Z = Z₀ᵍ`, the head top at `Z = Zᵗ_avg`.
//!
//! Two layouts are provided:
//!
//! * [`Formulation::PaperLiteral`]: unknowns `[C_Z, Xᵍ₀, Yᵍ₀, Xᵗ₀, Yᵗ₀, …]`,
//!   giving `4N × (4N + 1)`. With `Z₀ᵍ = 0` the foot rows are homogeneous and
//!   the head unknowns are free, so the system always has a one-dimensional
//!   nullspace; the minimum-norm solution is returned along with its rank.
//! * [`Formulation::VerticalConstrained`]: the head is assumed to sit straight
//!   above the foot, so each person shares one `(X, Y)`, giving
//!   `4N × (2N + 1)` with full column rank in general position.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{
    project, CameraIntrinsics, CameraPose, GeometryError, PixelPoint, ProjectionCoefficients,
    ProjectionMatrix, WorldPoint,
};

/// Average person height used when none is configured, in meters.
pub const DEFAULT_AVERAGE_HEIGHT_M: f64 = 1.7018;
/// Boxes shorter than this are dropped before assembling the system.
pub const DEFAULT_MIN_BOX_HEIGHT_PX: f64 = 8.0;
/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no detections")]
    Empty,
    #[error("no detection passes the {min_box_height_px} px box height floor")]
    NoUsableDetections { min_box_height_px: f64 },
    #[error("invalid bounding box: {0}")]
    InvalidBox(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("average height {avg_height_m} m must exceed the foot plane {foot_plane_m} m")]
    InvalidHeightModel {
        avg_height_m: f64,
        foot_plane_m: f64,
    },
    #[error("system matrix is empty or all zero")]
    DegenerateSystem,
    #[error("rank {rank} is below the {unknowns} unknowns of the vertical system")]
    DegenerateConfiguration { rank: usize, unknowns: usize },
    #[error("recovered camera height {camera_height_m} m is not above the {avg_height_m} m person height")]
    ImplausibleGeometry {
        camera_height_m: f64,
        avg_height_m: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Axis-aligned pixel box, `left < right`, `top < bottom`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self, CalibrationError> {
        if ![left, top, right, bottom].iter().all(|x| x.is_finite()) {
            return Err(CalibrationError::NonFinite("bounding box"));
        }
        if right <= left {
            return Err(CalibrationError::InvalidBox("right must exceed left"));
        }
        if bottom <= top {
            return Err(CalibrationError::InvalidBox("bottom must exceed top"));
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(
            0.5 * (self.left + self.right),
            0.5 * (self.top + self.bottom),
        )
    }

    pub fn bottom_center(&self) -> PixelPoint {
        PixelPoint::new(0.5 * (self.left + self.right), self.bottom)
    }

    pub fn top_center(&self) -> PixelPoint {
        PixelPoint::new(0.5 * (self.left + self.right), self.top)
    }
}

/// A person box reduced to a foot (ground contact) and head-top pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonDetection {
    pub frame_id: i64,
    pub bbox: BoundingBox,
    pub foot_px: PixelPoint,
    pub head_px: PixelPoint,
}

impl PersonDetection {
    /// Foot at the bottom-center and head at the top-center of the box.
    pub fn from_bbox(frame_id: i64, bbox: BoundingBox) -> Self {
        Self {
            frame_id,
            bbox,
            foot_px: bbox.bottom_center(),
            head_px: bbox.top_center(),
        }
    }

    /// Detection with keypoints that need not coincide with the box edges.
    pub fn with_keypoints(
        frame_id: i64,
        bbox: BoundingBox,
        foot_px: PixelPoint,
        head_px: PixelPoint,
    ) -> Result<Self, CalibrationError> {
        if !(foot_px.is_finite() && head_px.is_finite()) {
            return Err(CalibrationError::NonFinite("keypoints"));
        }
        Ok(Self {
            frame_id,
            bbox,
            foot_px,
            head_px,
        })
    }

    pub fn box_height_px(&self) -> f64 {
        self.bbox.height()
    }
}

/// Height prior: every head top at `avg_height_m`, every foot at `foot_plane_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightModel {
    avg_height_m: f64,
    foot_plane_m: f64,
}

impl Default for HeightModel {
    fn default() -> Self {
        Self {
            avg_height_m: DEFAULT_AVERAGE_HEIGHT_M,
            foot_plane_m: 0.0,
        }
    }
}

impl HeightModel {
    pub fn new(avg_height_m: f64, foot_plane_m: f64) -> Result<Self, CalibrationError> {
        if !(avg_height_m.is_finite() && foot_plane_m.is_finite()) {
            return Err(CalibrationError::NonFinite("height model"));
        }
        if avg_height_m <= foot_plane_m {
            return Err(CalibrationError::InvalidHeightModel {
                avg_height_m,
                foot_plane_m,
            });
        }
        Ok(Self {
            avg_height_m,
            foot_plane_m,
        })
    }

    pub fn with_average(avg_height_m: f64) -> Result<Self, CalibrationError> {
        Self::new(avg_height_m, 0.0)
    }

    pub fn avg_height_m(&self) -> f64 {
        self.avg_height_m
    }

    pub fn foot_plane_m(&self) -> f64 {
        self.foot_plane_m
    }

    /// Both heights multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, CalibrationError> {
        Self::new(self.avg_height_m * s, self.foot_plane_m * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    PaperLiteral,
    #[default]
    VerticalConstrained,
}

/// Dense `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LinearSystem {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// The two equations contributed by pixel `px` of a point at height `z`.
/// Returns `(C_Z, X, Y)` coefficients and right-hand sides for the u and v rows.
fn pixel_rows(p: &ProjectionCoefficients, px: &PixelPoint, z: f64) -> [([f64; 3], f64); 2] {
    let (u, v) = (px.u, px.v);
    [
        (
            [p.d - u * p.l, p.a - u * p.i, p.b - u * p.j],
            z * (u * p.k - p.c),
        ),
        (
            [p.h - v * p.l, p.e - v * p.i, p.f - v * p.j],
            z * (v * p.k - p.g),
        ),
    ]
}

fn check_inputs(
    detections: &[PersonDetection],
    coeffs: &ProjectionCoefficients,
) -> Result<(), CalibrationError> {
    if detections.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if !coeffs.is_finite() {
        return Err(CalibrationError::NonFinite("projection coefficients"));
    }
    if !detections
        .iter()
        .all(|d| d.foot_px.is_finite() && d.head_px.is_finite())
    {
        return Err(CalibrationError::NonFinite("detection pixels"));
    }
    Ok(())
}

/// `4N × (4N + 1)` system with separate foot and head unknowns per person.
///
/// Rows per person: foot-u, foot-v, head-u, head-v. Columns: `C_Z`, then
/// `(Xᵍ, Yᵍ, Xᵗ, Yᵗ)` per person.
pub fn build_system_literal(
    detections: &[PersonDetection],
    coeffs: &ProjectionCoefficients,
    heights: &HeightModel,
) -> Result<LinearSystem, CalibrationError> {
    check_inputs(detections, coeffs)?;
    let n = detections.len();
    let mut matrix = DMatrix::zeros(4 * n, 4 * n + 1);
    let mut rhs = DVector::zeros(4 * n);
    for (p, det) in detections.iter().enumerate() {
        let points = [
            (det.foot_px, heights.foot_plane_m, 1 + 4 * p),
            (det.head_px, heights.avg_height_m, 3 + 4 * p),
        ];
        for (k, (px, z, col)) in points.into_iter().enumerate() {
            for (r, (coef, b)) in pixel_rows(coeffs, &px, z).into_iter().enumerate() {
                let row = 4 * p + 2 * k + r;
                matrix[(row, 0)] = coef[0];
                matrix[(row, col)] = coef[1];
                matrix[(row, col + 1)] = coef[2];
                rhs[row] = b;
            }
        }
    }
    Ok(LinearSystem { matrix, rhs })
}

/// `4N × (2N + 1)` system where head and foot share the person's `(X, Y)`.
pub fn build_system_vertical(
    detections: &[PersonDetection],
    coeffs: &ProjectionCoefficients,
    heights: &HeightModel,
) -> Result<LinearSystem, CalibrationError> {
    check_inputs(detections, coeffs)?;
    let n = detections.len();
    let mut matrix = DMatrix::zeros(4 * n, 2 * n + 1);
    let mut rhs = DVector::zeros(4 * n);
    for (p, det) in detections.iter().enumerate() {
        let col = 1 + 2 * p;
        let points = [
            (det.foot_px, heights.foot_plane_m),
            (det.head_px, heights.avg_height_m),
        ];
        for (k, (px, z)) in points.into_iter().enumerate() {
            for (r, (coef, b)) in pixel_rows(coeffs, &px, z).into_iter().enumerate() {
                let row = 4 * p + 2 * k + r;
                matrix[(row, 0)] = coef[0];
                matrix[(row, col)] = coef[1];
                matrix[(row, col + 1)] = coef[2];
                rhs[row] = b;
            }
        }
    }
    Ok(LinearSystem { matrix, rhs })
}

/// Minimum-norm least-squares solution with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub solution: DVector<f64>,
    /// `‖A x − b‖₂ / √rows`
    pub residual_rms: f64,
    pub rank: usize,
    /// Singular values, largest first.
    pub singular_values: Vec<f64>,
}

impl LeastSquaresSolution {
    /// Ratio of the largest to the smallest retained singular value.
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.rank) {
            (Some(&hi), r) if r > 0 => hi / self.singular_values[r - 1],
            _ => f64::INFINITY,
        }
    }
}

/// Solves `A x = b` through the SVD, discarding singular values below
/// [`RANK_TOLERANCE`] times the largest.
pub fn solve_system(system: &LinearSystem) -> Result<LeastSquaresSolution, CalibrationError> {
    let a = &system.matrix;
    if a.is_empty() || a.amax() == 0.0 {
        return Err(CalibrationError::DegenerateSystem);
    }
    if !(a.iter().all(|x| x.is_finite()) && system.rhs.iter().all(|x| x.is_finite())) {
        return Err(CalibrationError::NonFinite("linear system"));
    }
    let svd = a.clone().svd(true, true);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    let cutoff = RANK_TOLERANCE * singular_values[0];
    let rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    let solution = svd
        .solve(&system.rhs, cutoff)
        .map_err(|_| CalibrationError::DegenerateSystem)?;
    let residual = a * &solution - &system.rhs;
    let residual_rms = residual.norm() / libm::sqrt(a.nrows() as f64);
    Ok(LeastSquaresSolution {
        solution,
        residual_rms,
        rank,
        singular_values,
    })
}

/// Where one detected person stands and where their head top is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonPosition {
    pub foot: WorldPoint,
    pub head: WorldPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSolution {
    pub camera_height_m: f64,
    /// One entry per used detection, in the order of `detection_indices`.
    pub person_positions: Vec<PersonPosition>,
    /// RMS pixel distance between every observed foot/head pixel and the
    /// projection of its recovered world point.
    pub residual_rms_px: f64,
    /// RMS of the algebraic residual `A x − b`.
    pub system_residual_rms: f64,
    pub formulation: Formulation,
    pub rank: usize,
    pub unknowns: usize,
    pub condition_number: f64,
    /// Indices into the input detections that survived the box height floor.
    pub detection_indices: Vec<usize>,
    pub projection: ProjectionMatrix,
}

impl CalibrationSolution {
    /// Dimension of the solution family; 0 when the height is pinned down.
    pub fn nullity(&self) -> usize {
        self.unknowns - self.rank
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub formulation: Formulation,
    pub min_box_height_px: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            formulation: Formulation::VerticalConstrained,
            min_box_height_px: DEFAULT_MIN_BOX_HEIGHT_PX,
        }
    }
}

impl From<Formulation> for CalibrationOptions {
    fn from(formulation: Formulation) -> Self {
        Self {
            formulation,
            ..Self::default()
        }
    }
}

/// Recovers `C_Z` and person positions for a camera with known intrinsics,
/// tilt and roll.
pub fn calibrate(
    detections: &[PersonDetection],
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    heights: &HeightModel,
    options: &CalibrationOptions,
) -> Result<CalibrationSolution, CalibrationError> {
    if detections.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let detection_indices: Vec<usize> = detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.box_height_px() >= options.min_box_height_px)
        .map(|(i, _)| i)
        .collect();
    if detection_indices.is_empty() {
        return Err(CalibrationError::NoUsableDetections {
            min_box_height_px: options.min_box_height_px,
        });
    }
    let used: Vec<PersonDetection> = detection_indices.iter().map(|&i| detections[i]).collect();
    let coeffs = ProjectionCoefficients::new(intrinsics, &pose.rotation());

    let system = match options.formulation {
        Formulation::PaperLiteral => build_system_literal(&used, &coeffs, heights)?,
        Formulation::VerticalConstrained => build_system_vertical(&used, &coeffs, heights)?,
    };
    let unknowns = system.cols();
    let lsq = solve_system(&system)?;
    let x = &lsq.solution;
    let camera_height_m = x[0];

    if options.formulation == Formulation::VerticalConstrained {
        if lsq.rank < unknowns {
            return Err(CalibrationError::DegenerateConfiguration {
                rank: lsq.rank,
                unknowns,
            });
        }
        if !(camera_height_m > heights.avg_height_m) {
            return Err(CalibrationError::ImplausibleGeometry {
                camera_height_m,
                avg_height_m: heights.avg_height_m,
            });
        }
    }
    // The minimum-norm literal solution typically puts the camera below head
    // height; the rank report is the diagnostic, so only a non-positive
    // height (no projection matrix) is rejected there.
    let projection =
        coeffs
            .with_height(camera_height_m)
            .map_err(|_| CalibrationError::ImplausibleGeometry {
                camera_height_m,
                avg_height_m: heights.avg_height_m,
            })?;

    let person_positions: Vec<PersonPosition> = (0..used.len())
        .map(|p| {
            let (foot_xy, head_xy) = match options.formulation {
                Formulation::VerticalConstrained => {
                    let xy = (x[1 + 2 * p], x[2 + 2 * p]);
                    (xy, xy)
                }
                Formulation::PaperLiteral => {
                    ((x[1 + 4 * p], x[2 + 4 * p]), (x[3 + 4 * p], x[4 + 4 * p]))
                }
            };
            PersonPosition {
                foot: WorldPoint::new(foot_xy.0, foot_xy.1, heights.foot_plane_m),
                head: WorldPoint::new(head_xy.0, head_xy.1, heights.avg_height_m),
            }
        })
        .collect();

    let residual_rms_px = pixel_rms(&projection, &used, &person_positions);

    Ok(CalibrationSolution {
        camera_height_m,
        person_positions,
        residual_rms_px,
        system_residual_rms: lsq.residual_rms,
        formulation: options.formulation,
        rank: lsq.rank,
        unknowns,
        condition_number: lsq.condition_number(),
        detection_indices,
        projection,
    })
}

fn pixel_rms(p: &ProjectionMatrix, dets: &[PersonDetection], positions: &[PersonPosition]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (det, pos) in dets.iter().zip(positions) {
        for (world, observed) in [(pos.foot, det.foot_px), (pos.head, det.head_px)] {
            let err = project(p, &world).map_or(f64::INFINITY, |px| px.distance(&observed));
            sum += err * err;
            count += 1;
        }
    }
    libm::sqrt(sum / count as f64)
}
