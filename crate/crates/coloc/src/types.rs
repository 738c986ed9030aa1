//! Shared geometric and probabilistic value types.
//!
//! Two invariants enforced here carry the rest of the crate: headings are
//! always wrapped to `(-pi, pi]`, and covariance matrices are re-symmetrized
//! (and checked for positive semidefiniteness) after every filter step.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this floor mean the covariance is no longer PSD within
/// numerical tolerance.
pub const EIG_FLOOR: f64 = -1e-10;

/// Wrap an angle to the half-open interval `(-pi, pi]`.
///
/// Errors on non-finite input, which can only come from corrupted state.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFiniteAngle(a));
    }
    Ok(wrap_finite(a))
}

/// Wrapping core. The fast path returns in-range values untouched, which
/// makes wrapping bit-exact idempotent.
#[inline]
pub(crate) fn wrap_finite(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose of one robot: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `(-pi, pi]` by every constructor.
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap_finite(theta),
        }
    }

    pub fn origin() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// 3x3 pose covariance. Stored exactly symmetric; construction rejects
/// matrices with eigenvalues below [`EIG_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov3(Matrix3<f64>);

impl Cov3 {
    /// Symmetrize `(m + m^T)/2` and validate positive semidefiniteness.
    pub fn symmetrized(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite covariance entry".into(),
            ));
        }
        let s = (m + m.transpose()) * 0.5;
        let min_eig = s.symmetric_eigenvalues().min();
        if min_eig < EIG_FLOOR {
            return Err(Error::CovarianceCollapse { min_eig });
        }
        Ok(Cov3(s))
    }

    /// Diagonal covariance from per-axis variances.
    pub fn from_diagonal(var_x: f64, var_y: f64, var_theta: f64) -> Self {
        Cov3(Matrix3::from_diagonal(&nalgebra::Vector3::new(
            var_x, var_y, var_theta,
        )))
    }

    pub fn zeros() -> Self {
        Cov3(Matrix3::zeros())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Spec'd free-function form of [`Cov3::symmetrized`].
pub fn symmetrize(m: &Matrix3<f64>) -> Result<Cov3> {
    Cov3::symmetrized(m)
}

/// One robot's factor of the inter-robot cross-covariance: robot i holds
/// `sigma_i` with `P12 = sigma_1 * sigma_2^T`. Prediction multiplies the
/// local motion Jacobian in without any communication; a cooperative update
/// re-factors as `sigma_1 = P12+`, `sigma_2 = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossFactor(Matrix3<f64>);

impl CrossFactor {
    pub fn identity() -> Self {
        CrossFactor(Matrix3::identity())
    }

    pub fn zeros() -> Self {
        CrossFactor(Matrix3::zeros())
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        CrossFactor(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Local propagation `sigma <- F * sigma`.
    pub fn propagated(&self, f: &Matrix3<f64>) -> Self {
        CrossFactor(f * self.0)
    }
}

/// Commanded (or encoder-measured) body velocities at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
    /// Sample time, seconds.
    pub stamp: f64,
}

impl ControlInput {
    pub fn new(v: f64, omega: f64, stamp: f64) -> Self {
        ControlInput { v, omega, stamp }
    }
}

/// Process and measurement noise configuration (SI units, variances).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Linear-velocity variance, (m/s)^2.
    pub q_v: f64,
    /// Angular-velocity variance, (rad/s)^2.
    pub q_omega: f64,
    /// Range variance, m^2.
    pub r_range: f64,
    /// Bearing variance, rad^2.
    pub r_bearing: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q_v: 0.1 * 0.1,
            q_omega: 0.1 * 0.1,
            r_range: 0.01 * 0.01,
            r_bearing: (PI / 180.0) * (PI / 180.0),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q_v", self.q_v),
            ("q_omega", self.q_omega),
            ("r_range", self.r_range),
            ("r_bearing", self.r_bearing),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    format!("noise.{name}"),
                    format!("must be > 0 and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Control-noise covariance `Q = diag(q_v, q_omega)`.
    pub fn q_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.q_v, 0.0, 0.0, self.q_omega)
    }

    /// Polar measurement-noise covariance `R = diag(r_range, r_bearing)`.
    pub fn r_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.r_range, 0.0, 0.0, self.r_bearing)
    }
}
