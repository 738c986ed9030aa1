//! Comparison estimators: dead reckoning, landmark-only localization, and
//! the centralized joint filter over the stacked two-robot state.
//!
//! The joint filter doubles as the exactness oracle for the decentralized
//! estimator: with lossless, zero-delay packet exchange the decentralized
//! beliefs must reproduce its blocks step for step.

use nalgebra::{Matrix2, Matrix3, Matrix6, Matrix2x6, Matrix6x2, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::dcl::{self, landmark_measurement_model};
use crate::error::{Error, Result};
use crate::motion::{self, COV_JITTER};
use crate::sensors::RangeBearing;
use crate::types::{wrap_finite, ControlInput, Cov3, Pose2, EIG_FLOOR};

/// Belief of a robot that never exchanges information: mean and own
/// covariance only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoloBelief {
    pub mean: Pose2,
    pub cov: Cov3,
    pub last_stamp: f64,
}

impl SoloBelief {
    pub fn new(mean: Pose2, cov: Cov3, stamp: f64) -> Self {
        SoloBelief {
            mean,
            cov,
            last_stamp: stamp,
        }
    }
}

/// Odometry-only step: identical math to the decentralized prediction, with
/// no update ever applied.
pub fn dr_step(
    belief: &SoloBelief,
    u: &ControlInput,
    dt: f64,
    q: &Matrix2<f64>,
    q_scale: f64,
) -> Result<SoloBelief> {
    let jac = motion::jacobians(&belief.mean, u, dt)?;
    Ok(SoloBelief {
        mean: motion::propagate(&belief.mean, u, dt)?,
        cov: motion::propagate_cov(&belief.cov, &jac, &(q * q_scale))?,
        last_stamp: belief.last_stamp + dt,
    })
}

/// Landmark-only EKF update for an individual robot; shares the update core
/// with the private decentralized update.
pub fn sl_update(belief: &SoloBelief, z: &RangeBearing, landmark: &[f64; 2]) -> Result<SoloBelief> {
    let (mean, cov, _) = dcl::solo_landmark_update(&belief.mean, &belief.cov, z, landmark)?;
    Ok(SoloBelief {
        mean,
        cov,
        last_stamp: belief.last_stamp.max(z.stamp),
    })
}

/// Stacked two-robot belief used by the centralized filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointBelief {
    pub mean1: Pose2,
    pub mean2: Pose2,
    pub cov: Matrix6<f64>,
    pub last_stamp: f64,
}

fn symmetrized6(m: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite joint covariance".into()));
    }
    let s = (m + m.transpose()) * 0.5;
    let min_eig = s.symmetric_eigenvalues().min();
    if min_eig < EIG_FLOOR {
        return Err(Error::CovarianceCollapse { min_eig });
    }
    Ok(s)
}

impl JointBelief {
    pub fn new(mean1: Pose2, mean2: Pose2, p11: &Cov3, p22: &Cov3, stamp: f64) -> Self {
        let mut cov = Matrix6::zeros();
        cov.fixed_view_mut::<3, 3>(0, 0).copy_from(p11.matrix());
        cov.fixed_view_mut::<3, 3>(3, 3).copy_from(p22.matrix());
        JointBelief {
            mean1,
            mean2,
            cov,
            last_stamp: stamp,
        }
    }

    pub fn p11(&self) -> Matrix3<f64> {
        self.cov.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn p22(&self) -> Matrix3<f64> {
        self.cov.fixed_view::<3, 3>(3, 3).into_owned()
    }

    pub fn p12(&self) -> Matrix3<f64> {
        self.cov.fixed_view::<3, 3>(0, 3).into_owned()
    }

    pub fn mean(&self, robot: usize) -> Pose2 {
        if robot == 0 {
            self.mean1
        } else {
            self.mean2
        }
    }

    pub fn block(&self, robot: usize) -> Matrix3<f64> {
        if robot == 0 {
            self.p11()
        } else {
            self.p22()
        }
    }
}

/// Joint prediction with block-diagonal state and noise Jacobians. The
/// off-diagonal correlation propagates as `F1 P12 F2^T`.
pub fn ccl_predict(
    joint: &JointBelief,
    u1: &ControlInput,
    u2: &ControlInput,
    dt: f64,
    q1: &Matrix2<f64>,
    q2: &Matrix2<f64>,
    q_scale: f64,
) -> Result<JointBelief> {
    let jac1 = motion::jacobians(&joint.mean1, u1, dt)?;
    let jac2 = motion::jacobians(&joint.mean2, u2, dt)?;
    let mean1 = motion::propagate(&joint.mean1, u1, dt)?;
    let mean2 = motion::propagate(&joint.mean2, u2, dt)?;

    let mut f = Matrix6::zeros();
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(&jac1.f);
    f.fixed_view_mut::<3, 3>(3, 3).copy_from(&jac2.f);
    let mut noise = Matrix6::zeros();
    noise
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(jac1.g * (q1 * q_scale) * jac1.g.transpose()));
    noise
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(jac2.g * (q2 * q_scale) * jac2.g.transpose()));

    let cov = f * joint.cov * f.transpose() + noise + Matrix6::identity() * COV_JITTER;
    Ok(JointBelief {
        mean1,
        mean2,
        cov: symmetrized6(&cov)?,
        last_stamp: joint.last_stamp + dt,
    })
}

fn joint_update(joint: &JointBelief, h: &Matrix2x6<f64>, r: &Vector2<f64>, r_cart: &Matrix2<f64>) -> Result<JointBelief> {
    let s = h * joint.cov * h.transpose() + r_cart;
    let s_inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularInnovation)?;
    let k: Matrix6x2<f64> = joint.cov * h.transpose() * s_inv;
    let d: Vector6<f64> = k * r;
    let mean1 = Pose2::new(
        joint.mean1.x + d[0],
        joint.mean1.y + d[1],
        wrap_finite(joint.mean1.theta + d[2]),
    );
    let mean2 = Pose2::new(
        joint.mean2.x + d[3],
        joint.mean2.y + d[4],
        wrap_finite(joint.mean2.theta + d[5]),
    );
    let cov = (Matrix6::identity() - k * h) * joint.cov;
    Ok(JointBelief {
        mean1,
        mean2,
        cov: symmetrized6(&cov)?,
        last_stamp: joint.last_stamp,
    })
}

/// Centralized cooperative update with the stacked Jacobian `[H1 H2]`.
pub fn ccl_update(joint: &JointBelief, z: &RangeBearing) -> Result<JointBelief> {
    let (h_pred, jac) = dcl::coop_measurement_model(&joint.mean1, &joint.mean2);
    let (z_cart, r_cart) = dcl::polar_to_cartesian(z);
    let mut h = Matrix2x6::zeros();
    h.fixed_view_mut::<2, 3>(0, 0).copy_from(&jac.h1);
    h.fixed_view_mut::<2, 3>(0, 3).copy_from(&jac.h2);
    let mut out = joint_update(joint, &h, &(z_cart - h_pred), &r_cart)?;
    out.last_stamp = joint.last_stamp.max(z.stamp);
    Ok(out)
}

/// Centralized landmark update: only the observing robot's block enters the
/// Jacobian, `H = [H_L 0]`, but the gain still corrects both robots through
/// the correlation.
pub fn ccl_lm_update(joint: &JointBelief, z: &RangeBearing, landmark: &[f64; 2]) -> Result<JointBelief> {
    let (h_pred, h_l) = landmark_measurement_model(&joint.mean1, landmark);
    let (z_cart, r_cart) = dcl::polar_to_cartesian(z);
    let mut h = Matrix2x6::zeros();
    h.fixed_view_mut::<2, 3>(0, 0).copy_from(&h_l);
    let mut out = joint_update(joint, &h, &(z_cart - h_pred), &r_cart)?;
    out.last_stamp = joint.last_stamp.max(z.stamp);
    Ok(out)
}

/// Innovation covariance of the joint cooperative measurement, for gating.
pub fn ccl_innovation(joint: &JointBelief, r_cart: &Matrix2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
    let (h_pred, jac) = dcl::coop_measurement_model(&joint.mean1, &joint.mean2);
    let mut h = Matrix2x6::zeros();
    h.fixed_view_mut::<2, 3>(0, 0).copy_from(&jac.h1);
    h.fixed_view_mut::<2, 3>(0, 3).copy_from(&jac.h2);
    (h_pred, h * joint.cov * h.transpose() + r_cart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcl::{coop_update_initiator, coop_update_responder, CompanionState, RobotBelief};
    use crate::types::CrossFactor;
    use approx::assert_abs_diff_eq;

    fn q() -> Matrix2<f64> {
        Matrix2::new(0.01, 0.0, 0.0, 0.01)
    }

    fn r_polar() -> Matrix2<f64> {
        Matrix2::new(1e-4, 0.0, 0.0, (1f64.to_radians()).powi(2))
    }

    #[test]
    fn dr_zero_input_is_stationary() {
        let b = SoloBelief::new(Pose2::origin(), Cov3::from_diagonal(0.1, 0.1, 0.1), 0.0);
        let out = dr_step(&b, &ControlInput::new(0.0, 0.0, 0.1), 0.1, &Matrix2::zeros(), 1.0).unwrap();
        assert_eq!(out.mean, b.mean);
    }

    #[test]
    fn dr_straight_second() {
        let mut b = SoloBelief::new(Pose2::origin(), Cov3::zeros(), 0.0);
        for k in 1..=10 {
            b = dr_step(&b, &ControlInput::new(1.0, 0.0, 0.1 * k as f64), 0.1, &q(), 1.0).unwrap();
        }
        assert_abs_diff_eq!(b.mean.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dr_uncertainty_grows_unbounded() {
        let mut b = SoloBelief::new(Pose2::origin(), Cov3::zeros(), 0.0);
        let mut last = 0.0;
        for k in 1..=130 {
            b = dr_step(&b, &ControlInput::new(0.5, 0.0, 0.166 * k as f64), 0.166, &q(), 1.0).unwrap();
            let tr = b.cov.trace();
            assert!(tr > last, "trace not strictly increasing at {k}");
            last = tr;
        }
    }

    #[test]
    fn ccl_predict_keeps_zero_cross_blocks() {
        let j = JointBelief::new(
            Pose2::origin(),
            Pose2::new(2.0, 0.0, 0.0),
            &Cov3::from_diagonal(0.1, 0.1, 0.05),
            &Cov3::from_diagonal(0.2, 0.2, 0.05),
            0.0,
        );
        let u = ControlInput::new(0.3, 0.1, 0.1);
        let out = ccl_predict(&j, &u, &u, 0.1, &q(), &q(), 1.0).unwrap();
        assert_abs_diff_eq!(out.p12().norm(), 0.0, epsilon = 1e-15);

        // Zero input, zero noise: means unchanged.
        let idle = ccl_predict(&j, &ControlInput::new(0.0, 0.0, 0.1), &ControlInput::new(0.0, 0.0, 0.1), 0.1, &Matrix2::zeros(), &Matrix2::zeros(), 1.0).unwrap();
        assert_eq!(idle.mean1, j.mean1);
        assert_eq!(idle.mean2, j.mean2);
    }

    #[test]
    fn ccl_update_couples_the_blocks() {
        let j = JointBelief::new(
            Pose2::origin(),
            Pose2::new(2.0, 0.0, 0.0),
            &Cov3::from_diagonal(0.1, 0.1, 0.05),
            &Cov3::from_diagonal(0.2, 0.2, 0.05),
            0.0,
        );
        let z = RangeBearing::new(2.0, 0.0, 0.5, r_polar()).unwrap();
        let out = ccl_update(&j, &z).unwrap();
        assert!(out.p12().norm() > 1e-6, "cross block still zero");
        // Zero innovation leaves the means in place.
        assert_abs_diff_eq!(out.mean1.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.mean2.x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ccl_update_matches_hand_kalman_algebra() {
        let j = JointBelief::new(
            Pose2::origin(),
            Pose2::new(1.5, 0.4, 0.2),
            &Cov3::from_diagonal(0.04, 0.03, 0.02),
            &Cov3::from_diagonal(0.05, 0.06, 0.01),
            0.0,
        );
        let z = RangeBearing::new(1.6, 0.3, 0.5, r_polar()).unwrap();
        let out = ccl_update(&j, &z).unwrap();

        // Independent dense evaluation of the same Kalman algebra.
        let (h_pred, jac) = dcl::coop_measurement_model(&j.mean1, &j.mean2);
        let (z_cart, r_cart) = dcl::polar_to_cartesian(&z);
        let mut h = Matrix2x6::zeros();
        h.fixed_view_mut::<2, 3>(0, 0).copy_from(&jac.h1);
        h.fixed_view_mut::<2, 3>(0, 3).copy_from(&jac.h2);
        let s = h * j.cov * h.transpose() + r_cart;
        let k = j.cov * h.transpose() * s.try_inverse().unwrap();
        let d = k * (z_cart - h_pred);
        assert_abs_diff_eq!(out.mean1.x, j.mean1.x + d[0], epsilon = 1e-12);
        assert_abs_diff_eq!(out.mean2.theta, wrap_finite(j.mean2.theta + d[5]), epsilon = 1e-12);
        let p_post = (Matrix6::identity() - k * h) * j.cov;
        assert_abs_diff_eq!((out.cov - (p_post + p_post.transpose()) * 0.5).norm(), 0.0, epsilon = 1e-12);
    }

    /// Small-number exactness check: the decentralized update pair equals
    /// the blocks of the joint filter fed the same measurement.
    #[test]
    fn decentralized_update_equals_joint_blocks() {
        let p11 = Cov3::from_diagonal(0.04, 0.03, 0.02);
        let p22 = Cov3::from_diagonal(0.05, 0.06, 0.01);
        let b1 = RobotBelief::new(Pose2::new(0.1, -0.2, 0.3), p11, CrossFactor::zeros(), 0.0);
        let b2 = RobotBelief::new(Pose2::new(1.9, 0.4, -0.5), p22, CrossFactor::identity(), 0.0);
        let joint = JointBelief::new(b1.mean, b2.mean, &p11, &p22, 0.0);

        let z = RangeBearing::new(1.85, 0.28, 1.0, r_polar()).unwrap();
        let (b1_post, packet) = coop_update_initiator(&b1, &CompanionState::from(&b2), &z).unwrap();
        let b2_post = coop_update_responder(&b2, &packet).unwrap();
        let j_post = ccl_update(&joint, &z).unwrap();

        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
        assert!(rel(b1_post.mean.x, j_post.mean1.x) < 1e-9);
        assert!(rel(b1_post.mean.y, j_post.mean1.y) < 1e-9);
        assert!(rel(b2_post.mean.x, j_post.mean2.x) < 1e-9);
        assert!(rel(b2_post.mean.y, j_post.mean2.y) < 1e-9);
        assert!((b1_post.cov.matrix() - j_post.p11()).norm() / j_post.p11().norm() < 1e-9);
        assert!((b2_post.cov.matrix() - j_post.p22()).norm() / j_post.p22().norm() < 1e-9);
        let p12 = b1_post.cross.matrix() * b2_post.cross.matrix().transpose();
        assert!((p12 - j_post.p12()).norm() / j_post.p12().norm().max(1e-12) < 1e-9);
    }

    /// The private-update cross correction is what keeps the factored
    /// cross-covariance equal to the joint block; without it they diverge.
    #[test]
    fn private_cross_correction_matches_joint_block() {
        let p11 = Cov3::from_diagonal(0.04, 0.03, 0.02);
        let p22 = Cov3::from_diagonal(0.05, 0.06, 0.01);
        let mut b1 = RobotBelief::new(Pose2::new(0.1, -0.2, 0.3), p11, CrossFactor::zeros(), 0.0);
        let mut b2 = RobotBelief::new(Pose2::new(1.9, 0.4, -0.5), p22, CrossFactor::identity(), 0.0);
        let mut joint = JointBelief::new(b1.mean, b2.mean, &p11, &p22, 0.0);

        // One cooperative exchange to build correlation.
        let z = RangeBearing::new(1.85, 0.28, 1.0, r_polar()).unwrap();
        let (b1n, packet) = coop_update_initiator(&b1, &CompanionState::from(&b2), &z).unwrap();
        b1 = b1n;
        b2 = coop_update_responder(&b2, &packet).unwrap();
        joint = ccl_update(&joint, &z).unwrap();

        let lm = [1.0, 2.0];
        let zl = RangeBearing::new(2.2, 1.1, 2.0, r_polar()).unwrap();
        let with = crate::dcl::private_update(&b1, &zl, &lm, true).unwrap();
        let without = crate::dcl::private_update(&b1, &zl, &lm, false).unwrap();

        // Joint filter processing the same private measurement, but with the
        // companion's mean held (no communication): the cross block is what
        // we compare against.
        let (h_pred, h_l) = landmark_measurement_model(&joint.mean1, &lm);
        let (z_cart, r_cart) = dcl::polar_to_cartesian(&zl);
        let s = h_l * joint.p11() * h_l.transpose() + r_cart;
        let k = joint.p11() * h_l.transpose() * s.try_inverse().unwrap();
        let _ = z_cart - h_pred;
        let p12_joint = (Matrix3::identity() - k * h_l) * joint.p12();

        let p12_with = with.cross.matrix() * b2.cross.matrix().transpose();
        let p12_without = without.cross.matrix() * b2.cross.matrix().transpose();
        assert!((p12_with - p12_joint).norm() / p12_joint.norm() < 1e-9);
        assert!((p12_without - p12_joint).norm() / p12_joint.norm() > 1e-3);
    }

    #[test]
    fn sl_update_matches_private_math() {
        let cov = Cov3::from_diagonal(0.02, 0.03, 0.01);
        let solo = SoloBelief::new(Pose2::new(0.2, 0.1, 0.05), cov, 0.0);
        let b = RobotBelief::new(solo.mean, cov, CrossFactor::zeros(), 0.0);
        let lm = [2.0, 1.0];
        let z = RangeBearing::new(2.0, 0.4, 1.0, r_polar()).unwrap();
        let a = sl_update(&solo, &z, &lm).unwrap();
        let p = crate::dcl::private_update(&b, &z, &lm, true).unwrap();
        assert_eq!(a.mean, p.mean);
        assert_eq!(a.cov, p.cov);
    }
}
