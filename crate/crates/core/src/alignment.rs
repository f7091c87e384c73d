//! Least-squares rigid registration of matched 3-D point sets and
//! correspondence error statistics.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{RotationMatrix, WorldPoint};

/// Relative singular-value floor below which a point set counts as collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignmentError {
    #[error("point lists differ in length ({source_len} vs {target_len})")]
    LengthMismatch {
        source_len: usize,
        target_len: usize,
    },
    #[error("need at least 3 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("correspondences are collinear or coincident")]
    Collinear,
    #[error("no correspondences")]
    Empty,
    #[error("non-finite coordinates")]
    NonFinite,
}

/// `x ↦ R x + t`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from_vector(&(self.rotation.rotate(&p.to_vector()) + self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -rt.rotate(&self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }
}

/// `x ↦ s R x + t`. Only meant for diagnosing scale error; [`fit_rigid`] is
/// the registration used for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from_vector(
            &(self.rotation.rotate(&p.to_vector()) * self.scale + self.translation),
        )
    }
}

struct Centered {
    source_mean: Vector3<f64>,
    target_mean: Vector3<f64>,
    /// `Σ (t_i − t̄)(s_i − s̄)ᵀ`
    cross: Matrix3<f64>,
    source_spread: f64,
}

fn center(source: &[WorldPoint], target: &[WorldPoint]) -> Result<Centered, AlignmentError> {
    if source.len() != target.len() {
        return Err(AlignmentError::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(AlignmentError::TooFewPoints(source.len()));
    }
    if !source.iter().chain(target).all(WorldPoint::is_finite) {
        return Err(AlignmentError::NonFinite);
    }
    let n = source.len() as f64;
    let source_mean = source.iter().map(|p| p.to_vector()).sum::<Vector3<f64>>() / n;
    let target_mean = target.iter().map(|p| p.to_vector()).sum::<Vector3<f64>>() / n;
    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut source_spread = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s.to_vector() - source_mean;
        let tc = t.to_vector() - target_mean;
        cross += tc * sc.transpose();
        scatter += sc * sc.transpose();
        source_spread += sc.norm_squared();
    }
    // A rotation is pinned down only if the source spans at least a line
    // plus one off-line direction.
    let sv = scatter.singular_values();
    let (hi, mid) = sorted_pair(&sv);
    if hi == 0.0 || mid <= COLLINEAR_TOLERANCE * hi {
        return Err(AlignmentError::Collinear);
    }
    Ok(Centered {
        source_mean,
        target_mean,
        cross,
        source_spread,
    })
}

fn sorted_pair(sv: &Vector3<f64>) -> (f64, f64) {
    let mut v = [sv[0], sv[1], sv[2]];
    v.sort_by(|a, b| b.total_cmp(a));
    (v[0], v[1])
}

/// Rotation maximizing `tr(Rᵀ H)` for the cross-covariance `H`, with the
/// reflection fix `diag(1, 1, det(U Vᵀ))`. Also returns `Σ σ_i d_i`.
fn best_rotation(cross: &Matrix3<f64>) -> (Matrix3<f64>, f64) {
    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sigma = svd.singular_values;
    // nalgebra does not sort singular values; the sign flip belongs on the
    // smallest one.
    let smallest = (0..3)
        .min_by(|&a, &b| sigma[a].total_cmp(&sigma[b]))
        .unwrap_or(2);
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        d[smallest] = -1.0;
    }
    let r = u * Matrix3::from_diagonal(&d) * v_t;
    (r, sigma.dot(&d))
}

/// Least-squares rigid transform taking `source[i]` onto `target[i]`.
pub fn fit_rigid(
    source: &[WorldPoint],
    target: &[WorldPoint],
) -> Result<RigidTransform, AlignmentError> {
    let c = center(source, target)?;
    let (r, _) = best_rotation(&c.cross);
    let rotation = RotationMatrix::from_matrix(r).map_err(|_| AlignmentError::Collinear)?;
    let translation = c.target_mean - r * c.source_mean;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Least-squares similarity (Umeyama) fit; exposes the scale that a rigid
/// fit would leave as residual.
pub fn fit_similarity(
    source: &[WorldPoint],
    target: &[WorldPoint],
) -> Result<SimilarityTransform, AlignmentError> {
    let c = center(source, target)?;
    let (r, trace) = best_rotation(&c.cross);
    let rotation = RotationMatrix::from_matrix(r).map_err(|_| AlignmentError::Collinear)?;
    let scale = trace / c.source_spread;
    let translation = c.target_mean - r * c.source_mean * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Per-correspondence residuals after alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceReport {
    pub mean_error_m: f64,
    /// Population standard deviation.
    pub std_error_m: f64,
    pub max_error_m: f64,
    pub per_point_error_m: Vec<f64>,
}

pub fn correspondence_errors(
    transform: &RigidTransform,
    source: &[WorldPoint],
    target: &[WorldPoint],
) -> Result<CorrespondenceReport, AlignmentError> {
    if source.len() != target.len() {
        return Err(AlignmentError::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.is_empty() {
        return Err(AlignmentError::Empty);
    }
    let per_point_error_m: Vec<f64> = source
        .iter()
        .zip(target)
        .map(|(s, t)| transform.apply(s).distance(t))
        .collect();
    if !per_point_error_m.iter().all(|e| e.is_finite()) {
        return Err(AlignmentError::NonFinite);
    }
    let n = per_point_error_m.len() as f64;
    let mean_error_m = per_point_error_m.iter().sum::<f64>() / n;
    let var = per_point_error_m
        .iter()
        .map(|e| (e - mean_error_m) * (e - mean_error_m))
        .sum::<f64>()
        / n;
    let max_error_m = per_point_error_m.iter().copied().fold(0.0, f64::max);
    Ok(CorrespondenceReport {
        mean_error_m,
        std_error_m: libm::sqrt(var),
        max_error_m,
        per_point_error_m,
    })
}
