//! Pinhole camera algebra.
//!
//! World frame: Z up, ground plane at Z = 0, camera center at `(0, 0, C_Z)`.
//! Image frame: `u` to the right, `v` down, origin at the top-left pixel.
//!
//! Camera orientation is built as `R = R_roll * R_pitch * R_overhead`, every
//! factor acting on camera coordinates:
//!
//! ```text
//!              [ 1  0  0 ]              [ 1    0      0   ]             [ cos r  -sin r  0 ]
//! R_overhead = [ 0  0 -1 ]   R_pitch =  [ 0  cos p  sin p ]   R_roll =  [ sin r   cos r  0 ]
//!              [ 0  1  0 ]              [ 0 -sin p  cos p ]             [   0       0    1 ]
//! ```
//!
//! `R_overhead` looks along world +Y with image `u` along world +X and image
//! `v` along world -Z, so the base camera has a horizontal optical axis. The
//! pitch is `tilt - 90°`: tilt 90° keeps the axis horizontal, tilt 0° points
//! the camera straight down. Positive pitch raises the optical axis; roll
//! spins the camera about its optical axis.

use core::fmt;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use thiserror::Error;

/// Tolerance used when checking that a matrix is a proper rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("tilt must lie strictly between 0 and 180 degrees, got {0}")]
    TiltOutOfRange(f64),
    #[error("focal length must be positive and finite, got {0}")]
    InvalidFocalLength(f64),
    #[error("principal point ({u}, {v}) is outside the sanity band for a {width}x{height} image")]
    PrincipalPointOutOfBand {
        u: f64,
        v: f64,
        width: f64,
        height: f64,
    },
    #[error("camera height must be positive and finite, got {0}")]
    InvalidCameraHeight(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not a proper rotation")]
    NotARotation,
    #[error("point lies on the camera's principal plane")]
    DegenerateProjection,
    #[error("camera ray does not meet the plane in front of the camera")]
    HorizonDegenerate,
    #[error("left 3x3 block of the projection matrix is singular")]
    SingularProjection,
}

/// A pixel location, `u` right and `v` down.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        libm::hypot(self.u - other.u, self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl fmt::Display for PixelPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// A point in the Z-up world frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    fn homogeneous(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, 1.0)
    }
}

/// Focal length and principal point; square pixels, no skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    focal_length_px: f64,
    principal_point: PixelPoint,
}

impl CameraIntrinsics {
    pub fn new(focal_length_px: f64, principal_point: PixelPoint) -> Result<Self, GeometryError> {
        if !(focal_length_px.is_finite() && focal_length_px > 0.0) {
            return Err(GeometryError::InvalidFocalLength(focal_length_px));
        }
        if !principal_point.is_finite() {
            return Err(GeometryError::NonFinite("principal point"));
        }
        Ok(Self {
            focal_length_px,
            principal_point,
        })
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal_length_px: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(focal_length_px, PixelPoint::new(width / 2.0, height / 2.0))
    }

    /// Checks the principal point against a `[0, 4 * dim]` band for an image
    /// of the given size.
    pub fn check_image_bounds(&self, width: f64, height: f64) -> Result<(), GeometryError> {
        let pp = self.principal_point;
        if pp.u < 0.0 || pp.v < 0.0 || pp.u > 4.0 * width || pp.v > 4.0 * height {
            return Err(GeometryError::PrincipalPointOutOfBand {
                u: pp.u,
                v: pp.v,
                width,
                height,
            });
        }
        Ok(())
    }

    pub fn focal_length_px(&self) -> f64 {
        self.focal_length_px
    }

    pub fn principal_point(&self) -> PixelPoint {
        self.principal_point
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let f = self.focal_length_px;
        let PixelPoint { u, v } = self.principal_point;
        Matrix3::new(f, 0.0, u, 0.0, f, v, 0.0, 0.0, 1.0)
    }
}

/// Camera orientation from tilt and roll, plus the camera height once known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    tilt_deg: f64,
    roll_deg: f64,
    camera_height_m: Option<f64>,
}

impl CameraPose {
    pub fn new(tilt_deg: f64, roll_deg: f64) -> Result<Self, GeometryError> {
        check_tilt(tilt_deg)?;
        if !roll_deg.is_finite() {
            return Err(GeometryError::NonFinite("roll"));
        }
        Ok(Self {
            tilt_deg,
            roll_deg,
            camera_height_m: None,
        })
    }

    pub fn with_height(mut self, camera_height_m: f64) -> Result<Self, GeometryError> {
        check_height(camera_height_m)?;
        self.camera_height_m = Some(camera_height_m);
        Ok(self)
    }

    pub fn tilt_deg(&self) -> f64 {
        self.tilt_deg
    }

    pub fn roll_deg(&self) -> f64 {
        self.roll_deg
    }

    /// Off-nadir pitch, `tilt - 90°`.
    pub fn pitch_deg(&self) -> f64 {
        self.tilt_deg - 90.0
    }

    pub fn camera_height_m(&self) -> Option<f64> {
        self.camera_height_m
    }

    pub fn rotation(&self) -> RotationMatrix {
        // Invariants were checked at construction.
        rotation_unchecked(self.tilt_deg, self.roll_deg)
    }
}

/// A proper 3x3 rotation mapping world directions to camera directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// The horizontal-looking base orientation that pitch and roll act on.
    pub fn overhead() -> Self {
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0))
    }

    /// Wraps `m` after checking `m^T m = I` and `det m = +1` to
    /// [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation);
        }
        Ok(Self(m))
    }

    /// Rotation about the world/camera x axis by `angle_rad` (right-handed).
    pub fn about_x(angle_rad: f64) -> Self {
        let (s, c) = libm::sincos(angle_rad);
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle_rad: f64) -> Self {
        let (s, c) = libm::sincos(angle_rad);
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle_rad: f64) -> Self {
        let (s, c) = libm::sincos(angle_rad);
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &RotationMatrix) -> Self {
        Self(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Optical axis direction expressed in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.0.row(2).transpose()
    }

    /// `‖RᵀR − I‖∞`
    pub fn orthonormality_residual(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// Builds `R_roll * R_pitch * R_overhead` with `pitch = tilt - 90°`.
pub fn build_rotation(tilt_deg: f64, roll_deg: f64) -> Result<RotationMatrix, GeometryError> {
    check_tilt(tilt_deg)?;
    if !roll_deg.is_finite() {
        return Err(GeometryError::NonFinite("roll"));
    }
    Ok(rotation_unchecked(tilt_deg, roll_deg))
}

fn rotation_unchecked(tilt_deg: f64, roll_deg: f64) -> RotationMatrix {
    let pitch = (tilt_deg - 90.0).to_radians();
    let roll = roll_deg.to_radians();
    // Positive pitch raises the axis, which is a negative turn about camera x.
    let r_pitch = RotationMatrix::about_x(-pitch);
    let r_roll = RotationMatrix::about_z(roll);
    r_roll
        .compose(&r_pitch)
        .compose(&RotationMatrix::overhead())
}

fn check_tilt(tilt_deg: f64) -> Result<(), GeometryError> {
    if tilt_deg.is_finite() && tilt_deg > 0.0 && tilt_deg < 180.0 {
        Ok(())
    } else {
        Err(GeometryError::TiltOutOfRange(tilt_deg))
    }
}

fn check_height(camera_height_m: f64) -> Result<(), GeometryError> {
    if camera_height_m.is_finite() && camera_height_m > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidCameraHeight(camera_height_m))
    }
}

/// The height-free coefficients `a..l` of
///
/// ```text
///     [ a  b  c  d*C_Z ]
/// P = [ e  f  g  h*C_Z ]
///     [ i  j  k  l*C_Z ]
/// ```
///
/// for a camera centered at `(0, 0, C_Z)`. Because `t = -R C`, the fourth
/// column is always the negated third one: `d = -c`, `h = -g`, `l = -k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub i: f64,
    pub j: f64,
    pub k: f64,
    pub l: f64,
}

impl ProjectionCoefficients {
    pub fn new(intrinsics: &CameraIntrinsics, rotation: &RotationMatrix) -> Self {
        let m = intrinsics.matrix() * rotation.matrix();
        // Fourth column of K [R | -R (0,0,1)^T].
        let col = -(intrinsics.matrix() * rotation.matrix().column(2));
        Self {
            a: m[(0, 0)],
            b: m[(0, 1)],
            c: m[(0, 2)],
            d: col[0],
            e: m[(1, 0)],
            f: m[(1, 1)],
            g: m[(1, 2)],
            h: col[1],
            i: m[(2, 0)],
            j: m[(2, 1)],
            k: m[(2, 2)],
            l: col[2],
        }
    }

    /// Full projection matrix for a camera at height `camera_height_m`.
    pub fn with_height(&self, camera_height_m: f64) -> Result<ProjectionMatrix, GeometryError> {
        check_height(camera_height_m)?;
        let cz = camera_height_m;
        Ok(ProjectionMatrix(Matrix3x4::new(
            self.a,
            self.b,
            self.c,
            self.d * cz,
            self.e,
            self.f,
            self.g,
            self.h * cz,
            self.i,
            self.j,
            self.k,
            self.l * cz,
        )))
    }

    pub fn is_finite(&self) -> bool {
        [
            self.a, self.b, self.c, self.d, self.e, self.f, self.g, self.h, self.i, self.j, self.k,
            self.l,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// A 3x4 camera matrix `P = K [R | t]`, defined up to scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(Matrix3x4<f64>);

impl ProjectionMatrix {
    /// Wraps an arbitrary 3x4 matrix whose left 3x3 block is invertible.
    pub fn from_matrix(m: Matrix3x4<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite("projection matrix"));
        }
        let left = m.fixed_view::<3, 3>(0, 0).into_owned();
        let scale = left.amax();
        if scale == 0.0 || (left / scale).determinant().abs() < DEGENERATE_EPS {
            return Err(GeometryError::SingularProjection);
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Same camera with every entry multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0 * s)
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> [[f64; 4]; 3] {
        let mut out = [[0.0; 4]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = self.0[(r, c)];
            }
        }
        out
    }

    pub fn from_rows(rows: [[f64; 4]; 3]) -> Result<Self, GeometryError> {
        let mut m = Matrix3x4::zeros();
        for (r, row) in rows.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                m[(r, c)] = *x;
            }
        }
        Self::from_matrix(m)
    }

    fn left_inverse(&self) -> Result<Matrix3<f64>, GeometryError> {
        self.0
            .fixed_view::<3, 3>(0, 0)
            .into_owned()
            .try_inverse()
            .ok_or(GeometryError::SingularProjection)
    }

    /// The camera center `-M⁻¹ p₄`.
    pub fn camera_center(&self) -> Result<WorldPoint, GeometryError> {
        let inv = self.left_inverse()?;
        let p4 = self.0.column(3).into_owned();
        Ok(WorldPoint::from_vector(&-(inv * p4)))
    }

    /// Image line `(l0, l1, l2)` with `l0 u + l1 v + l2 = 0` where rays run
    /// parallel to the ground plane. Pixels on the side where the line value
    /// has the sign of [`ProjectionMatrix::ground_side`] see the ground.
    pub fn horizon_line(&self) -> Result<[f64; 3], GeometryError> {
        let inv = self.left_inverse()?;
        Ok([inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]])
    }

    /// Sign of the horizon line value for pixels whose rays hit a plane below
    /// the camera.
    pub fn ground_side(&self) -> Result<f64, GeometryError> {
        let det = self.0.fixed_view::<3, 3>(0, 0).determinant();
        // Ray direction is M⁻¹ x̃ scaled by the (positive) depth when det > 0;
        // downward rays have negative z.
        Ok(if det > 0.0 { -1.0 } else { 1.0 })
    }

    /// Splits `P` into an upper-triangular `K` (positive diagonal, `K[2][2] = 1`),
    /// a proper rotation and the camera center.
    pub fn decompose(&self) -> Result<DecomposedCamera, GeometryError> {
        let mut p = self.0;
        let left = p.fixed_view::<3, 3>(0, 0).into_owned();
        if left.determinant() < 0.0 {
            p = -p;
        }
        let m = p.fixed_view::<3, 3>(0, 0).into_owned();
        let (mut k, mut r) = rq3(&m);
        for idx in 0..3 {
            if k[(idx, idx)] < 0.0 {
                k.column_mut(idx).neg_mut();
                r.row_mut(idx).neg_mut();
            }
        }
        let scale = k[(2, 2)];
        k /= scale;
        let rotation = RotationMatrix::from_matrix(r)?;
        let center = Self(p).camera_center()?;
        Ok(DecomposedCamera {
            calibration: k,
            rotation,
            center,
        })
    }
}

/// Result of [`ProjectionMatrix::decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposedCamera {
    pub calibration: Matrix3<f64>,
    pub rotation: RotationMatrix,
    pub center: WorldPoint,
}

impl DecomposedCamera {
    /// Square-pixel intrinsics read off the calibration matrix.
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, GeometryError> {
        let k = &self.calibration;
        CameraIntrinsics::new(
            0.5 * (k[(0, 0)] + k[(1, 1)]),
            PixelPoint::new(k[(0, 2)], k[(1, 2)]),
        )
    }

    /// `K [R | -R C]`
    pub fn recompose(&self) -> ProjectionMatrix {
        let r = self.rotation.matrix();
        let t = -(r * self.center.to_vector());
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        rt.set_column(3, &t);
        ProjectionMatrix(self.calibration * rt)
    }
}

/// RQ decomposition of a 3x3 matrix via QR of the row-reversed transpose.
fn rq3(m: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let flip = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
    let qr = (flip * m).transpose().qr();
    let q = qr.q();
    let u = qr.r();
    let upper = flip * u.transpose() * flip;
    let rot = flip * q.transpose();
    (upper, rot)
}

/// `P = K [R | -R (0, 0, C_Z)ᵀ]`
pub fn compose_projection(
    intrinsics: &CameraIntrinsics,
    rotation: &RotationMatrix,
    camera_height_m: f64,
) -> Result<ProjectionMatrix, GeometryError> {
    ProjectionCoefficients::new(intrinsics, rotation).with_height(camera_height_m)
}

/// Projects a world point to pixels.
///
/// Fails when the point lies on the camera's principal plane, i.e. the
/// homogeneous scale vanishes relative to the magnitude of its terms.
pub fn project(p: &ProjectionMatrix, pt: &WorldPoint) -> Result<PixelPoint, GeometryError> {
    if !pt.is_finite() {
        return Err(GeometryError::NonFinite("world point"));
    }
    let x = pt.homogeneous();
    let img = p.0 * x;
    let lambda = img[2];
    let magnitude: f64 = (0..4).map(|c| (p.0[(2, c)] * x[c]).abs()).sum();
    if lambda.abs() <= DEGENERATE_EPS * magnitude || magnitude == 0.0 {
        return Err(GeometryError::DegenerateProjection);
    }
    Ok(PixelPoint::new(img[0] / lambda, img[1] / lambda))
}

/// Intersects the camera ray through `px` with the plane `Z = plane_z`.
///
/// Fails with [`GeometryError::HorizonDegenerate`] when the ray is parallel
/// to the plane or meets it behind the camera.
pub fn backproject_to_plane(
    p: &ProjectionMatrix,
    px: &PixelPoint,
    plane_z: f64,
) -> Result<WorldPoint, GeometryError> {
    if !px.is_finite() || !plane_z.is_finite() {
        return Err(GeometryError::NonFinite("pixel"));
    }
    let left = p.0.fixed_view::<3, 3>(0, 0).into_owned();
    let inv = left
        .try_inverse()
        .ok_or(GeometryError::SingularProjection)?;
    let center = -(inv * p.0.column(3));
    let ray = inv * Vector3::new(px.u, px.v, 1.0);
    let norm = ray.norm();
    if !(norm > 0.0) || (ray[2] / norm).abs() < DEGENERATE_EPS {
        return Err(GeometryError::HorizonDegenerate);
    }
    let s = (plane_z - center[2]) / ray[2];
    // A point C + s*ray projects with scale s, which must share the sign of
    // det(M) to sit in front of the camera.
    if s * left.determinant() <= 0.0 {
        return Err(GeometryError::HorizonDegenerate);
    }
    let hit = center + ray * s;
    Ok(WorldPoint::new(hit[0], hit[1], plane_z))
}
