//! The per-robot decentralized EKF.
//!
//! Each robot owns its pose estimate, self-covariance, and one factor of the
//! inter-robot cross-covariance. Prediction is purely local (the factor picks
//! up the robot's own motion Jacobian). When the observer detects its
//! companion it computes the joint correction from the handshake snapshot,
//! applies its own half, and ships the companion's half as an
//! [`UpdatePacket`]. The responder needs nothing beyond that packet and its
//! own belief.
//!
//! With both updates delivered, the pair of local beliefs reproduces the
//! corresponding blocks of the joint EKF over the stacked six-state exactly;
//! that equivalence is the backbone of the test suite.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion;
use crate::sensors::RangeBearing;
use crate::types::{ControlInput, Cov3, CrossFactor, Pose2};

/// One robot's belief over its own pose plus its share of the inter-robot
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotBelief {
    pub mean: Pose2,
    pub cov: Cov3,
    pub cross: CrossFactor,
    /// Time the belief has been propagated to.
    pub last_stamp: f64,
    /// Stamp of the newest cooperative update applied; packets at or below
    /// it are stale.
    pub last_coop_stamp: f64,
}

impl RobotBelief {
    pub fn new(mean: Pose2, cov: Cov3, cross: CrossFactor, stamp: f64) -> Self {
        RobotBelief {
            mean,
            cov,
            cross,
            last_stamp: stamp,
            last_coop_stamp: f64::NEG_INFINITY,
        }
    }
}

/// Companion state snapshot exchanged in the measurement handshake: the
/// observed robot answers a detection with its current mean, covariance, and
/// cross-covariance factor, which is what the observer needs to form the
/// joint correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionState {
    pub mean: Pose2,
    pub cov: Cov3,
    pub cross: CrossFactor,
}

impl From<&RobotBelief> for CompanionState {
    fn from(b: &RobotBelief) -> Self {
        CompanionState {
            mean: b.mean,
            cov: b.cov,
            cross: b.cross,
        }
    }
}

/// Measurement Jacobians of the cooperative model with respect to both
/// robots' states. The companion's heading never enters the model, so the
/// third column of `h2` is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct CoopJacobians {
    pub h1: Matrix2x3<f64>,
    pub h2: Matrix2x3<f64>,
}

/// Body-frame displacement model: the observer's rotation applied to the
/// world-frame offset of the companion,
/// `h = [[cos t1, sin t1], [-sin t1, cos t1]] * [x2-x1, y2-y1]`.
pub fn coop_measurement_model(x1: &Pose2, x2: &Pose2) -> (Vector2<f64>, CoopJacobians) {
    let (sin1, cos1) = x1.theta.sin_cos();
    let dx = x2.x - x1.x;
    let dy = x2.y - x1.y;
    let h = Vector2::new(cos1 * dx + sin1 * dy, -sin1 * dx + cos1 * dy);
    let h1 = Matrix2x3::new(
        -cos1, -sin1, h.y,
        sin1, -cos1, -h.x,
    );
    let h2 = Matrix2x3::new(
        cos1, sin1, 0.0,
        -sin1, cos1, 0.0,
    );
    (h, CoopJacobians { h1, h2 })
}

/// Same rotation applied to a fixed landmark instead of the companion.
pub fn landmark_measurement_model(x1: &Pose2, landmark: &[f64; 2]) -> (Vector2<f64>, Matrix2x3<f64>) {
    let (h, jac) = coop_measurement_model(x1, &Pose2::new(landmark[0], landmark[1], 0.0));
    (h, jac.h1)
}

/// Convert a polar measurement to body-frame Cartesian and push its noise
/// through the polar-to-Cartesian Jacobian at the measured `(rho, phi)`.
pub fn polar_to_cartesian(z: &RangeBearing) -> (Vector2<f64>, Matrix2<f64>) {
    let (s, c) = z.phi.sin_cos();
    let cart = Vector2::new(z.rho * c, z.rho * s);
    let j = Matrix2::new(c, -z.rho * s, s, z.rho * c);
    (cart, j * z.r * j.transpose())
}

/// Express a predicted Cartesian displacement and its innovation covariance
/// in polar terms for gating. Fails when the prediction sits on the sensor.
pub fn to_polar_for_gate(h: &Vector2<f64>, s_cart: &Matrix2<f64>, stamp: f64) -> Result<(RangeBearing, Matrix2<f64>)> {
    let rho = h.norm();
    if rho <= 1e-9 {
        return Err(Error::SingularInnovation);
    }
    let phi = h.y.atan2(h.x);
    let (sp, cp) = phi.sin_cos();
    let j = Matrix2::new(cp, -rho * sp, sp, rho * cp);
    let j_inv = j.try_inverse().ok_or(Error::SingularInnovation)?;
    let s_polar = j_inv * s_cart * j_inv.transpose();
    let pred = RangeBearing::new(rho, phi, stamp, Matrix2::identity())?;
    Ok((pred, s_polar))
}

fn checked_inverse(s: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if !s.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    s.try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularInnovation)
}

/// Local prediction: propagate the mean, push the covariance through the
/// motion Jacobians, and advance the cross factor with the state Jacobian.
/// `q_scale` inflates the process noise of extrapolated sub-steps.
pub fn predict(
    belief: &RobotBelief,
    u: &ControlInput,
    dt: f64,
    q: &Matrix2<f64>,
    q_scale: f64,
) -> Result<RobotBelief> {
    let jac = motion::jacobians(&belief.mean, u, dt)?;
    let mean = motion::propagate(&belief.mean, u, dt)?;
    let cov = motion::propagate_cov(&belief.cov, &jac, &(q * q_scale))?;
    Ok(RobotBelief {
        mean,
        cov,
        cross: belief.cross.propagated(&jac.f),
        last_stamp: belief.last_stamp + dt,
        last_coop_stamp: belief.last_coop_stamp,
    })
}

/// Innovation covariance of the cooperative measurement (Cartesian space):
/// `S = H1 P11 H1' + H1 P12 H2' + H2 P21 H1' + H2 P22 H2' + R`.
pub fn coop_innovation_cov(
    belief1: &RobotBelief,
    companion: &CompanionState,
    jac: &CoopJacobians,
    r_cart: &Matrix2<f64>,
) -> Matrix2<f64> {
    let p12 = belief1.cross.matrix() * companion.cross.matrix().transpose();
    jac.h1 * belief1.cov.matrix() * jac.h1.transpose()
        + jac.h1 * p12 * jac.h2.transpose()
        + jac.h2 * p12.transpose() * jac.h1.transpose()
        + jac.h2 * companion.cov.matrix() * jac.h2.transpose()
        + r_cart
}

/// The event-triggered message from observer to observed robot. `p22` and
/// `p12` carry the post-update values computed on the observer side, so the
/// responder can realize its half of the correction without knowing the
/// observer's state or the measurement Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdatePacket {
    pub stamp: f64,
    /// Companion prior mean as used by the initiator (echoed back).
    pub x2_mean: Pose2,
    /// Companion posterior covariance.
    pub p22: Cov3,
    /// Posterior cross-covariance; the initiator keeps the same matrix as
    /// its new factor while the responder resets its factor to identity.
    pub p12: Matrix3<f64>,
    /// Cartesian innovation, meters.
    pub innovation: Vector2<f64>,
    /// Companion Kalman gain.
    pub k2: Matrix3x2<f64>,
}

/// Bytes of estimator payload accounted per delivered packet (mean,
/// covariances, innovation, gain).
pub const PACKET_PAYLOAD_BYTES: u64 = 232;
/// Full wire record including the stamp header.
pub const PACKET_WIRE_BYTES: usize = 240;

impl UpdatePacket {
    /// Flat little-endian record: stamp, x2_mean (3), P22 (9, row-major),
    /// P12 (9, row-major), r (2), K2 (6, row-major).
    pub fn to_bytes(&self) -> [u8; PACKET_WIRE_BYTES] {
        let mut out = [0u8; PACKET_WIRE_BYTES];
        let mut k = 0;
        let mut put = |v: f64, out: &mut [u8; PACKET_WIRE_BYTES]| {
            out[k * 8..(k + 1) * 8].copy_from_slice(&v.to_le_bytes());
            k += 1;
        };
        put(self.stamp, &mut out);
        put(self.x2_mean.x, &mut out);
        put(self.x2_mean.y, &mut out);
        put(self.x2_mean.theta, &mut out);
        for i in 0..3 {
            for j in 0..3 {
                put(self.p22.matrix()[(i, j)], &mut out);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                put(self.p12[(i, j)], &mut out);
            }
        }
        put(self.innovation.x, &mut out);
        put(self.innovation.y, &mut out);
        for i in 0..3 {
            for j in 0..2 {
                put(self.k2[(i, j)], &mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PACKET_WIRE_BYTES {
            return Err(Error::InvalidParameter(format!(
                "packet record must be {PACKET_WIRE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut k = 0;
        let mut get = || {
            let v = f64::from_le_bytes(bytes[k * 8..(k + 1) * 8].try_into().expect("8 bytes"));
            k += 1;
            v
        };
        let stamp = get();
        let x2_mean = Pose2::new(get(), get(), get());
        let mut p22 = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                p22[(i, j)] = get();
            }
        }
        let mut p12 = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                p12[(i, j)] = get();
            }
        }
        let innovation = Vector2::new(get(), get());
        let mut k2 = Matrix3x2::zeros();
        for i in 0..3 {
            for j in 0..2 {
                k2[(i, j)] = get();
            }
        }
        Ok(UpdatePacket {
            stamp,
            x2_mean,
            p22: Cov3::symmetrized(&p22)?,
            p12,
            innovation,
            k2,
        })
    }
}

/// Observer-side cooperative update. Consumes the handshake snapshot of the
/// companion, applies the observer's half of the joint correction, and
/// returns the packet realizing the companion's half.
///
/// The measurement enters in body-frame Cartesian form; gating must have
/// passed already, and both beliefs must be aligned to `z.stamp`.
pub fn coop_update_initiator(
    belief1: &RobotBelief,
    companion: &CompanionState,
    z: &RangeBearing,
) -> Result<(RobotBelief, UpdatePacket)> {
    let (h, jac) = coop_measurement_model(&belief1.mean, &companion.mean);
    let (z_cart, r_cart) = polar_to_cartesian(z);
    let p11 = *belief1.cov.matrix();
    let p22 = *companion.cov.matrix();
    let p12 = belief1.cross.matrix() * companion.cross.matrix().transpose();

    let s = coop_innovation_cov(belief1, companion, &jac, &r_cart);
    let s_inv = checked_inverse(&s)?;
    let k1 = (p11 * jac.h1.transpose() + p12 * jac.h2.transpose()) * s_inv;
    let k2 = (p22 * jac.h2.transpose() + p12.transpose() * jac.h1.transpose()) * s_inv;
    let r = z_cart - h;

    let i3 = Matrix3::identity();
    let p11_post = (i3 - k1 * jac.h1) * p11 - k1 * jac.h2 * p12.transpose();
    let p12_post = (i3 - k1 * jac.h1) * p12 - k1 * jac.h2 * p22;
    let p22_post = (i3 - k2 * jac.h2) * p22 - k2 * jac.h1 * p12;

    let d1 = k1 * r;
    let mean1 = Pose2::new(
        belief1.mean.x + d1[0],
        belief1.mean.y + d1[1],
        belief1.mean.theta + d1[2],
    );
    let updated = RobotBelief {
        mean: mean1,
        cov: Cov3::symmetrized(&p11_post)?,
        cross: CrossFactor::from_matrix(p12_post),
        last_stamp: belief1.last_stamp.max(z.stamp),
        last_coop_stamp: z.stamp,
    };
    let packet = UpdatePacket {
        stamp: z.stamp,
        x2_mean: companion.mean,
        p22: Cov3::symmetrized(&p22_post)?,
        p12: p12_post,
        innovation: r,
        k2,
    };
    Ok((updated, packet))
}

/// Responder-side cooperative update: apply the precomputed gain to the own
/// mean, install the posterior covariance, and reset the cross factor to
/// identity (the initiator holds the full posterior cross-covariance).
/// Packets not strictly newer than the last applied one are rejected.
pub fn coop_update_responder(belief2: &RobotBelief, packet: &UpdatePacket) -> Result<RobotBelief> {
    if packet.stamp <= belief2.last_coop_stamp {
        return Err(Error::StalePacket {
            stamp: packet.stamp,
            last: belief2.last_coop_stamp,
        });
    }
    let d2 = packet.k2 * packet.innovation;
    let mean = Pose2::new(
        belief2.mean.x + d2[0],
        belief2.mean.y + d2[1],
        belief2.mean.theta + d2[2],
    );
    Ok(RobotBelief {
        mean,
        cov: packet.p22,
        cross: CrossFactor::identity(),
        last_stamp: belief2.last_stamp.max(packet.stamp),
        last_coop_stamp: packet.stamp,
    })
}

/// Shared single-state EKF update against a fixed landmark; backs both the
/// private update here and the landmark-only baseline.
pub(crate) fn solo_landmark_update(
    mean: &Pose2,
    cov: &Cov3,
    z: &RangeBearing,
    landmark: &[f64; 2],
) -> Result<(Pose2, Cov3, Matrix3<f64>)> {
    let (h, h_l) = landmark_measurement_model(mean, landmark);
    let (z_cart, r_cart) = polar_to_cartesian(z);
    let p = *cov.matrix();
    let s = h_l * p * h_l.transpose() + r_cart;
    let s_inv = checked_inverse(&s)?;
    let k = p * h_l.transpose() * s_inv;
    let r = z_cart - h;
    let d = k * r;
    let mean_post = Pose2::new(mean.x + d[0], mean.y + d[1], mean.theta + d[2]);
    let gain_term = Matrix3::identity() - k * h_l;
    let cov_post = Cov3::symmetrized(&(gain_term * p))?;
    Ok((mean_post, cov_post, gain_term))
}

/// Private static-landmark update: corrects only the observing robot's own
/// state, no communication. When `touch_cross` is set the cross factor picks
/// up the same `(I - K H)` contraction, which keeps the reconstructed
/// cross-covariance equal to the joint filter's block.
pub fn private_update(
    belief: &RobotBelief,
    z: &RangeBearing,
    landmark: &[f64; 2],
    touch_cross: bool,
) -> Result<RobotBelief> {
    let (mean, cov, gain_term) = solo_landmark_update(&belief.mean, &belief.cov, z, landmark)?;
    let cross = if touch_cross {
        CrossFactor::from_matrix(gain_term * belief.cross.matrix())
    } else {
        belief.cross
    };
    Ok(RobotBelief {
        mean,
        cov,
        cross,
        last_stamp: belief.last_stamp.max(z.stamp),
        last_coop_stamp: belief.last_coop_stamp,
    })
}
