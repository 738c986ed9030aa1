//! Discrete unicycle kinematics and its Jacobians.
//!
//! One step advances the pose by
//! `[v*dt*cos(theta + omega*dt), v*dt*sin(theta + omega*dt), omega*dt]`,
//! i.e. the heading increment is applied before projecting the displacement.

use nalgebra::{Matrix2, Matrix3, Matrix3x2};

use crate::error::{Error, Result};
use crate::types::{ControlInput, Cov3, Pose2};

/// Additive diagonal jitter keeping covariances invertible through long
/// stationary stretches.
pub const COV_JITTER: f64 = 1e-12;

/// Analytic Jacobians of one prediction step.
#[derive(Debug, Clone, Copy)]
pub struct MotionJacobians {
    /// State Jacobian, 3x3. Unit diagonal; only the heading column couples.
    pub f: Matrix3<f64>,
    /// Control Jacobian, 3x2.
    pub g: Matrix3x2<f64>,
}

fn check_step(u: &ControlInput, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimestep(dt));
    }
    if !u.v.is_finite() || !u.omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "non-finite control ({}, {})",
            u.v, u.omega
        )));
    }
    Ok(())
}

/// Advance a pose by one control step of length `dt`. Heading comes back
/// wrapped.
pub fn propagate(pose: &Pose2, u: &ControlInput, dt: f64) -> Result<Pose2> {
    check_step(u, dt)?;
    let heading = pose.theta + u.omega * dt;
    Ok(Pose2::new(
        pose.x + u.v * dt * heading.cos(),
        pose.y + u.v * dt * heading.sin(),
        heading,
    ))
}

/// Partial derivatives of [`propagate`] with respect to state and control.
pub fn jacobians(pose: &Pose2, u: &ControlInput, dt: f64) -> Result<MotionJacobians> {
    check_step(u, dt)?;
    let heading = pose.theta + u.omega * dt;
    let (sin_h, cos_h) = heading.sin_cos();
    let f = Matrix3::new(
        1.0, 0.0, -u.v * dt * sin_h,
        0.0, 1.0, u.v * dt * cos_h,
        0.0, 0.0, 1.0,
    );
    let g = Matrix3x2::new(
        dt * cos_h, -u.v * dt * dt * sin_h,
        dt * sin_h, u.v * dt * dt * cos_h,
        0.0, dt,
    );
    Ok(MotionJacobians { f, g })
}

/// Covariance prediction `F P F^T + G Q G^T` plus jitter.
pub fn propagate_cov(p: &Cov3, jac: &MotionJacobians, q: &Matrix2<f64>) -> Result<Cov3> {
    let m = jac.f * p.matrix() * jac.f.transpose()
        + jac.g * q * jac.g.transpose()
        + Matrix3::identity() * COV_JITTER;
    Cov3::symmetrized(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_input_is_identity() {
        let p = Pose2::origin();
        let u = ControlInput::new(0.0, 0.0, 0.0);
        let out = propagate(&p, &u, 0.1).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn straight_line_moves_along_heading() {
        let p = Pose2::origin();
        let u = ControlInput::new(1.0, 0.0, 0.0);
        let out = propagate(&p, &u, 0.1).unwrap();
        assert_eq!(out.x, 0.1);
        assert_eq!(out.y, 0.0);
        assert_eq!(out.theta, 0.0);
    }

    #[test]
    fn curved_step_matches_independent_evaluation() {
        // Frozen from an independent evaluation of the step equation.
        let p = Pose2::new(1.0, 2.0, std::f64::consts::FRAC_PI_2);
        let u = ControlInput::new(1.0, 0.5, 0.0);
        let out = propagate(&p, &u, 0.166).unwrap();
        assert_abs_diff_eq!(out.x, 0.9862378139922208, epsilon = 1e-15);
        assert_abs_diff_eq!(out.y, 2.1654285411780183, epsilon = 1e-15);
        assert_abs_diff_eq!(out.theta, 1.6537963267948965, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_timestep() {
        let p = Pose2::origin();
        let u = ControlInput::new(1.0, 0.0, 0.0);
        assert!(matches!(
            propagate(&p, &u, 0.0),
            Err(Error::InvalidTimestep(_))
        ));
        assert!(matches!(
            propagate(&p, &u, -0.1),
            Err(Error::InvalidTimestep(_))
        ));
    }

    #[test]
    fn jacobian_structure() {
        let p = Pose2::origin();
        let jac = jacobians(&p, &ControlInput::new(0.0, 0.0, 0.0), 0.1).unwrap();
        assert_eq!(jac.f, Matrix3::identity());

        let jac = jacobians(&p, &ControlInput::new(1.0, 0.0, 0.0), 0.1).unwrap();
        assert_eq!(jac.f[(0, 2)], 0.0); // -v*dt*sin(0)
        assert_abs_diff_eq!(jac.f[(1, 2)], 0.1, epsilon = 1e-15);
        assert_eq!(jac.f[(0, 0)], 1.0);
        assert_eq!(jac.f[(1, 1)], 1.0);
        assert_eq!(jac.f[(2, 2)], 1.0);
    }

    /// Central finite differences of `propagate`, used as the independent
    /// Jacobian oracle.
    pub(crate) fn fd_jacobians(pose: &Pose2, u: &ControlInput, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
        let h = 1e-6;
        let eval = |p: &Pose2, c: &ControlInput| {
            let out = propagate(p, c, dt).unwrap();
            [out.x, out.y, out.theta]
        };
        let mut f = Matrix3::zeros();
        for col in 0..3 {
            let mut lo = *pose;
            let mut hi = *pose;
            match col {
                0 => {
                    lo.x -= h;
                    hi.x += h;
                }
                1 => {
                    lo.y -= h;
                    hi.y += h;
                }
                _ => {
                    lo.theta -= h;
                    hi.theta += h;
                }
            }
            let a = eval(&lo, u);
            let b = eval(&hi, u);
            for row in 0..3 {
                let mut d = b[row] - a[row];
                if row == 2 {
                    d = crate::types::wrap_finite(d);
                }
                f[(row, col)] = d / (2.0 * h);
            }
        }
        let mut g = Matrix3x2::zeros();
        for col in 0..2 {
            let mut lo = *u;
            let mut hi = *u;
            match col {
                0 => {
                    lo.v -= h;
                    hi.v += h;
                }
                _ => {
                    lo.omega -= h;
                    hi.omega += h;
                }
            }
            let a = eval(pose, &lo);
            let b = eval(pose, &hi);
            for row in 0..3 {
                let mut d = b[row] - a[row];
                if row == 2 {
                    d = crate::types::wrap_finite(d);
                }
                g[(row, col)] = d / (2.0 * h);
            }
        }
        (f, g)
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let pose = Pose2::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-3.0..3.0),
            );
            let u = ControlInput::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
                0.0,
            );
            let dt = rng.random_range(0.01..0.3);
            let jac = jacobians(&pose, &u, dt).unwrap();
            let (f_fd, g_fd) = fd_jacobians(&pose, &u, dt);
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(jac.f[(i, j)], f_fd[(i, j)], epsilon = 1e-5);
                }
                for j in 0..2 {
                    assert_abs_diff_eq!(jac.g[(i, j)], g_fd[(i, j)], epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn straight_run_has_no_lateral_drift() {
        let mut p = Pose2::new(0.0, 0.0, 0.0);
        let u = ControlInput::new(0.7, 0.0, 0.0);
        for _ in 0..200 {
            p = propagate(&p, &u, 0.05).unwrap();
        }
        assert_eq!(p.y, 0.0);
        assert_abs_diff_eq!(p.x, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn propagate_is_deterministic() {
        let p = Pose2::new(0.3, -1.2, 1.1);
        let u = ControlInput::new(0.4, -0.6, 0.0);
        let a = propagate(&p, &u, 0.166).unwrap();
        let b = propagate(&p, &u, 0.166).unwrap();
        assert_eq!(a, b);
    }
}
