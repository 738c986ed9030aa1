//! Trajectory logs and the error metrics computed from them.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_finite, Pose2};

/// One sample of a trajectory log: truth, estimate, covariance diagonal, and
/// the normalized estimation error squared at that instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub stamp: f64,
    pub truth: Pose2,
    pub est: Pose2,
    pub p_xx: f64,
    pub p_yy: f64,
    pub p_tt: f64,
    pub nees: f64,
}

impl LogRow {
    pub fn new(stamp: f64, truth: Pose2, est: Pose2, cov: &Matrix3<f64>) -> Self {
        let e = Vector3::new(
            est.x - truth.x,
            est.y - truth.y,
            wrap_finite(est.theta - truth.theta),
        );
        let nees = cov
            .try_inverse()
            .map(|inv| (e.transpose() * inv * e)[(0, 0)])
            .unwrap_or(f64::NAN);
        LogRow {
            stamp,
            truth,
            est,
            p_xx: cov[(0, 0)],
            p_yy: cov[(1, 1)],
            p_tt: cov[(2, 2)],
            nees,
        }
    }
}

/// Componentwise error statistics of one robot's track, plus its NEES
/// series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMetrics {
    pub rmse_x: f64,
    pub rmse_y: f64,
    /// Euclidean position RMSE, `sqrt(rmse_x^2 + rmse_y^2)`.
    pub rmse_pos: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub max_err_x: f64,
    pub max_err_y: f64,
    pub nees_mean: f64,
    pub nees: Vec<f64>,
}

/// RMSE, error variance, and max error per axis over a time-aligned track.
pub fn compute_metrics(rows: &[LogRow]) -> Result<RobotMetrics> {
    if rows.is_empty() {
        return Err(Error::LengthMismatch(0, 1));
    }
    let n = rows.len() as f64;
    let (mut sq_x, mut sq_y, mut sum_x, mut sum_y) = (0.0, 0.0, 0.0, 0.0);
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    let mut nees = Vec::with_capacity(rows.len());
    for r in rows {
        let ex = r.est.x - r.truth.x;
        let ey = r.est.y - r.truth.y;
        sq_x += ex * ex;
        sq_y += ey * ey;
        sum_x += ex;
        sum_y += ey;
        max_x = max_x.max(ex.abs());
        max_y = max_y.max(ey.abs());
        nees.push(r.nees);
    }
    let rmse_x = (sq_x / n).sqrt();
    let rmse_y = (sq_y / n).sqrt();
    let var_x = sq_x / n - (sum_x / n).powi(2);
    let var_y = sq_y / n - (sum_y / n).powi(2);
    let nees_mean = nees.iter().sum::<f64>() / n;
    let m = RobotMetrics {
        rmse_x,
        rmse_y,
        rmse_pos: (rmse_x * rmse_x + rmse_y * rmse_y).sqrt(),
        var_x,
        var_y,
        max_err_x: max_x,
        max_err_y: max_y,
        nees_mean,
        nees,
    };
    // Standard identities: rmse^2 = var + mean^2, and max >= rmse.
    debug_assert!(m.rmse_x * m.rmse_x + 1e-12 >= m.var_x);
    debug_assert!(m.max_err_x + 1e-12 >= m.rmse_x);
    Ok(m)
}

impl RobotMetrics {
    /// Ensemble means over trials. Scalar fields average; the NEES series
    /// averages per step (trials of one scenario share their log grid).
    pub fn ensemble<'a>(trials: impl Iterator<Item = &'a RobotMetrics>) -> RobotMetrics {
        let trials: Vec<_> = trials.collect();
        let n = trials.len().max(1) as f64;
        let mean = |f: fn(&RobotMetrics) -> f64| trials.iter().map(|t| f(t)).sum::<f64>() / n;
        let steps = trials.iter().map(|t| t.nees.len()).min().unwrap_or(0);
        let mut nees = vec![0.0; steps];
        for t in &trials {
            for (acc, v) in nees.iter_mut().zip(&t.nees) {
                *acc += v / n;
            }
        }
        let nees_mean = if steps > 0 {
            nees.iter().sum::<f64>() / steps as f64
        } else {
            f64::NAN
        };
        RobotMetrics {
            rmse_x: mean(|t| t.rmse_x),
            rmse_y: mean(|t| t.rmse_y),
            rmse_pos: mean(|t| t.rmse_pos),
            var_x: mean(|t| t.var_x),
            var_y: mean(|t| t.var_y),
            max_err_x: mean(|t| t.max_err_x),
            max_err_y: mean(|t| t.max_err_y),
            nees_mean,
            nees,
        }
    }
}
