//! Camera height calibration from pedestrian detections for a fixed
//! surveillance camera, ground-plane localization of people and vehicles,
//! and distance-based proximity predicates with ROC validation.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line front end live in the `pedcal` crate.

#![no_std]

extern crate alloc;

pub mod aggregate;
pub mod alignment;
pub mod calibration;
pub mod evaluation;
pub mod geometry;
pub mod proximity;
pub mod ransac;
pub mod simulate;

pub use aggregate::parameter_mode;
pub use alignment::{
    correspondence_errors, fit_rigid, fit_similarity, AlignmentError, CorrespondenceReport,
    RigidTransform, SimilarityTransform,
};
pub use calibration::{
    build_system_literal, build_system_vertical, calibrate, solve_system, BoundingBox,
    CalibrationError, CalibrationOptions, CalibrationSolution, Formulation, HeightModel,
    PersonDetection,
};
pub use evaluation::{label_pairs, roc_auc, EvaluationError, LabeledPair, LabeledSet, RocCurve};
pub use geometry::{
    backproject_to_plane, build_rotation, compose_projection, project, CameraIntrinsics,
    CameraPose, GeometryError, PixelPoint, ProjectionCoefficients, ProjectionMatrix,
    RotationMatrix, WorldPoint,
};
pub use proximity::{
    composite_probability, erf, erfc, ground_distance, p_near, NearPredicate, ProximityObservation,
};
pub use ransac::{ransac_calibrate, reprojection_error, RansacConfig, RansacError, RansacResult};
pub use simulate::{generate, SceneSpec, SimCamera, SyntheticScene};
