//! Deterministic two-robot cooperative localization.
//!
//! The estimation core is a distributed EKF: each robot predicts locally
//! from its encoders, carries one factor of the inter-robot cross-covariance
//! so correlation propagates without communication, and exchanges a single
//! compact packet per mutual detection. Landmark observations fold in as
//! private updates. Around the estimator sit a unicycle motion model, a
//! simulated LiDAR front end (adaptive-breakpoint segmentation plus
//! cylindrical marker extraction), a timestamp scheduler reconciling encoder
//! and scanner rates, a lossy-link model with exact bandwidth accounting,
//! and a scenario harness that runs the estimator against dead reckoning,
//! landmark-only, and centralized baselines on identical sensor streams.
//!
//! Everything is seeded and single-threaded by construction: the same
//! scenario and seed reproduce byte-identical logs and reports.

pub mod baselines;
pub mod dcl;
pub mod error;
pub mod harness;
pub mod motion;
pub mod network;
pub mod sensors;
pub mod sync;
pub mod types;

pub use error::{Error, Result};
pub use types::{wrap_angle, symmetrize, ControlInput, Cov3, CrossFactor, NoiseConfig, Pose2};
