//! Ground-plane distances, the erf-shaped `P(near)` predicate and product-form
//! activity probabilities.

use thiserror::Error;

use crate::geometry::WorldPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProximityError {
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("sharpness must be positive and finite, got {0}")]
    InvalidSharpness(f64),
    #[error("distance must be non-negative and finite, got {0}")]
    InvalidDistance(f64),
    #[error("probability factor {index} is {value}, outside [0, 1]")]
    InvalidFactor { index: usize, value: f64 },
    #[error("non-finite coordinates")]
    NonFinite,
}

const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;
const SERIES_LIMIT: f64 = 3.0;

/// Error function.
///
/// Maclaurin series `2/√π Σ (-1)ⁿ x²ⁿ⁺¹ / (n! (2n+1))` for `|x| ≤ 3` and the
/// continued fraction for `erfc` beyond; absolute error stays near 1e-15 on
/// the whole real line and `erf(0)` is exactly zero.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        erf_series(ax)
    } else {
        1.0 - erfc_continued_fraction(ax)
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

/// Complementary error function, `1 - erf(x)`, without cancellation for
/// large positive `x`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > SERIES_LIMIT {
        erfc_continued_fraction(x)
    } else if x < -SERIES_LIMIT {
        2.0 - erfc_continued_fraction(-x)
    } else {
        1.0 - erf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x; // (-1)^n x^(2n+1) / n!
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// `erfc(x) = exp(-x²)/√π · 1/(x + 1/2/(x + 1/(x + 3/2/(x + …))))`, evaluated
/// with the modified Lentz algorithm. Valid for `x > 0`, fast for `x ≥ 3`.
fn erfc_continued_fraction(x: f64) -> f64 {
    if x > 27.3 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    libm::exp(-x * x) / (f * core::f64::consts::PI.sqrt())
}

/// `P(near)` as a smooth step centered on a distance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearPredicate {
    threshold_m: f64,
    sharpness_m: f64,
}

impl Default for NearPredicate {
    fn default() -> Self {
        Self {
            threshold_m: 4.0,
            sharpness_m: 1.0,
        }
    }
}

impl NearPredicate {
    pub fn new(threshold_m: f64, sharpness_m: f64) -> Result<Self, ProximityError> {
        if !(threshold_m.is_finite() && threshold_m > 0.0) {
            return Err(ProximityError::InvalidThreshold(threshold_m));
        }
        if !(sharpness_m.is_finite() && sharpness_m > 0.0) {
            return Err(ProximityError::InvalidSharpness(sharpness_m));
        }
        Ok(Self {
            threshold_m,
            sharpness_m,
        })
    }

    pub fn threshold_m(&self) -> f64 {
        self.threshold_m
    }

    pub fn sharpness_m(&self) -> f64 {
        self.sharpness_m
    }

    /// `½ (1 − erf((d − τ) / (σ √2)))`
    pub fn probability(&self, distance_m: f64) -> Result<f64, ProximityError> {
        p_near(self, distance_m)
    }
}

/// Planar distance between two world points, ignoring height.
pub fn ground_distance(a: &WorldPoint, b: &WorldPoint) -> Result<f64, ProximityError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(ProximityError::NonFinite);
    }
    Ok(libm::hypot(a.x - b.x, a.y - b.y))
}

/// `½ (1 − erf((d − τ) / (σ √2)))`, computed as `½ erfc(·)` so the far tail
/// keeps decreasing instead of flattening to zero.
pub fn p_near(pred: &NearPredicate, distance_m: f64) -> Result<f64, ProximityError> {
    if !(distance_m.is_finite() && distance_m >= 0.0) {
        return Err(ProximityError::InvalidDistance(distance_m));
    }
    let z = (distance_m - pred.threshold_m) / (pred.sharpness_m * core::f64::consts::SQRT_2);
    Ok(0.5 * erfc(z))
}

/// Product of independent predicate probabilities, e.g.
/// `P(closing trunk) = P(facing) · P(near) · P(arm moving down)`.
pub fn composite_probability(factors: &[f64]) -> Result<f64, ProximityError> {
    let mut product = 1.0;
    for (index, &value) in factors.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(ProximityError::InvalidFactor { index, value });
        }
        product *= value;
    }
    Ok(product)
}

/// A person-vehicle pair measured on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProximityObservation {
    pub person_ground: WorldPoint,
    pub vehicle_centroid_ground: WorldPoint,
    pub distance_m: f64,
}

impl ProximityObservation {
    pub fn new(person: WorldPoint, vehicle: WorldPoint) -> Result<Self, ProximityError> {
        let distance_m = ground_distance(&person, &vehicle)?;
        Ok(Self {
            person_ground: WorldPoint::new(person.x, person.y, 0.0),
            vehicle_centroid_ground: WorldPoint::new(vehicle.x, vehicle.y, 0.0),
            distance_m,
        })
    }

    pub fn p_near(&self, pred: &NearPredicate) -> f64 {
        // distance_m is a hypot of finite values, hence valid.
        p_near(pred, self.distance_m).unwrap_or(0.0)
    }
}
