//! End-to-end orchestration: ground truth generation, sensor stream
//! synthesis, per-method filter execution, and trial ensembles.
//!
//! All methods replay one frozen event timeline per trial, so every
//! estimator sees bit-identical streams regardless of which methods run.

use nalgebra::{Matrix2, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::baselines::{self, JointBelief, SoloBelief};
use crate::dcl::{self, CompanionState, RobotBelief};
use crate::error::{Error, Result};
use crate::motion;
use crate::network::{continuous_broadcast_cost, BandwidthLedger, Link, SendOutcome};
use crate::sensors::{self, RangeBearing, WorldModel};
use crate::sync::{Action, Scheduler};
use crate::types::{wrap_finite, ControlInput, Cov3, CrossFactor, Pose2};

use super::metrics::{compute_metrics, LogRow, RobotMetrics};
use super::scenario::{Method, Scenario};

/// RNG stream ids carved out of the trial seed.
const STREAM_ENC1: u64 = 1;
const STREAM_ENC2: u64 = 2;
const STREAM_COOP: u64 = 3;
const STREAM_LANDMARK: u64 = 4;
const STREAM_INIT: u64 = 5;
/// Link randomness gets an independent generator.
const LINK_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One frozen simulation timeline: every filter-visible event in order.
#[derive(Debug, Clone)]
pub enum Event {
    /// Synchronized prediction step for both robots ending at `stamp`.
    Predict {
        stamp: f64,
        dt: f64,
        u1: ControlInput,
        u2: ControlInput,
        q_scale: f64,
    },
    /// Robot 1 detected robot 2 and the measurement passed synthesis.
    Coop { z: RangeBearing },
    /// Robot 1's static-landmark observations at this detection tick.
    Landmarks { stamp: f64, obs: Vec<(usize, RangeBearing)> },
    /// Sample point for the trajectory logs; truth is taken at the belief
    /// clock so estimate/truth pairs stay time-aligned.
    Log { stamp: f64, truth1: Pose2, truth2: Pose2 },
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub events: Vec<Event>,
    /// Encoder steps, the rate of the broadcast counterfactual.
    pub prediction_steps: u64,
    pub init_mean: [Pose2; 2],
    pub init_cov: [Cov3; 2],
}

/// Line-of-sight predicate: within range and no wall crossing.
pub fn mutual_visibility(x1: &Pose2, x2: &Pose2, world: &WorldModel, max_range: f64) -> bool {
    let a = Point2::new(x1.x, x1.y);
    let b = Point2::new(x2.x, x2.y);
    if (b - a).norm() > max_range {
        return false;
    }
    !world.occluded(&a, &b)
}

fn landmark_visible(x1: &Pose2, lm: &[f64; 2], world: &WorldModel, max_range: f64) -> bool {
    let a = Point2::new(x1.x, x1.y);
    let b = Point2::new(lm[0], lm[1]);
    (b - a).norm() <= max_range && !world.occluded(&a, &b)
}

/// Build the ground truth and every sensor stream for one trial.
pub fn build_timeline(scenario: &Scenario, seed: u64) -> Result<Timeline> {
    let world = scenario.world.to_model();
    let dt = scenario.time.dt;
    let steps = scenario.time.steps as u64;
    let duration = scenario.time.duration();
    let lidar_period = scenario.lidar_period();
    let lidar_ticks = (duration / lidar_period + 1e-9).floor() as u64;
    let inject = scenario.run.noise_injection_scale;

    let mut enc_rng = [stream_rng(seed, STREAM_ENC1), stream_rng(seed, STREAM_ENC2)];
    let mut coop_rng = stream_rng(seed, STREAM_COOP);
    let mut lm_rng = stream_rng(seed, STREAM_LANDMARK);
    let mut init_rng = stream_rng(seed, STREAM_INIT);

    let gaussian = |sigma: f64| {
        Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))
    };
    let n_v = gaussian(scenario.noise.q_v.sqrt() * inject)?;
    let n_w = gaussian(scenario.noise.q_omega.sqrt() * inject)?;
    let n_rho = gaussian(scenario.noise.r_range.sqrt() * inject)?;
    let n_phi = gaussian(scenario.noise.r_bearing.sqrt() * inject)?;

    // Each trial starts from its own true poses (protocol variation), and
    // the beliefs begin with a small calibrated offset around them.
    let uniform = |rng: &mut ChaCha12Rng, half: f64| {
        if half > 0.0 {
            rng.random_range(-half..half)
        } else {
            0.0
        }
    };
    let variation = scenario.run.start_variation;
    let variation_rad = variation[2].to_radians();
    let configured = [scenario.robot1.start_pose(), scenario.robot2.start_pose()];
    // Perturbations are drawn in each robot's configured start frame, so
    // re-expressing the whole scenario in a rotated world frame leaves the
    // realized errors untouched.
    let local_offset = |rng: &mut ChaCha12Rng, base: &Pose2, half: [f64; 3]| {
        let dx = uniform(rng, half[0]);
        let dy = uniform(rng, half[1]);
        let dth = uniform(rng, half[2]);
        let (sin, cos) = base.theta.sin_cos();
        Pose2::new(
            base.x + cos * dx - sin * dy,
            base.y + sin * dx + cos * dy,
            base.theta + dth,
        )
    };
    let mut truth_start = [Pose2::origin(); 2];
    for i in 0..2 {
        truth_start[i] = local_offset(
            &mut init_rng,
            &configured[i],
            [variation[0], variation[1], variation_rad],
        );
    }
    let jitter = [
        scenario.filter.init_jitter[0] * inject,
        scenario.filter.init_jitter[1] * inject,
        scenario.filter.init_jitter[2].to_radians() * inject,
    ];
    let mut init_mean = [Pose2::origin(); 2];
    for i in 0..2 {
        init_mean[i] = local_offset(&mut init_rng, &truth_start[i], jitter);
    }
    // Uniform(+-a) has variance a^2/3.
    let var = |a: f64| a * a / 3.0;
    let init_cov = [
        Cov3::from_diagonal(var(jitter[0]), var(jitter[1]), var(jitter[2])),
        Cov3::from_diagonal(var(jitter[0]), var(jitter[1]), var(jitter[2])),
    ];

    let mut truth = truth_start;
    let mut sched = [
        Scheduler::new(0.0, scenario.filter.slop, scenario.filter.extrapolation_noise_inflation),
        Scheduler::new(0.0, scenario.filter.slop, scenario.filter.extrapolation_noise_inflation),
    ];
    let programs = [&scenario.robot1.program, &scenario.robot2.program];
    let r_polar = scenario.noise.r_matrix();

    let mut events = Vec::new();

    // Merge the encoder and detection grids in stamp order, encoders first
    // on ties.
    let mut k = 1u64; // encoder tick
    let mut m = 1u64; // lidar tick
    while k <= steps || m <= lidar_ticks {
        let t_odo = k as f64 * dt;
        let t_lidar = m as f64 * lidar_period;
        let take_odo = k <= steps && (m > lidar_ticks || t_odo <= t_lidar + 1e-12);
        if take_odo {
            // Encoder sample at this stamp; the command stream feeds the
            // schedulers noiseless and the per-step measurement noise is
            // drawn when the prediction step is emitted, so every step's
            // control error is independent with covariance Q.
            let mut actions = [Vec::new(), Vec::new()];
            for i in 0..2 {
                let (v, w) = programs[i].eval(t_odo);
                sched[i].push_control(ControlInput::new(v, w, t_odo))?;
                actions[i] = sched[i].advance_to(t_odo)?;
            }
            emit_predicts(&mut events, &mut truth, programs, actions, &mut enc_rng, &n_v, &n_w)?;
            k += 1;
        } else {
            let mut actions = [Vec::new(), Vec::new()];
            for i in 0..2 {
                actions[i] = sched[i].advance_to(t_lidar)?;
            }
            emit_predicts(&mut events, &mut truth, programs, actions, &mut enc_rng, &n_v, &n_w)?;
            // During warm-up the beliefs cannot reach the detection grid
            // yet; skip measurement and log alike.
            let aligned = sched[0].clock() >= t_lidar - scenario.filter.slop - 1e-9
                && sched[1].clock() >= t_lidar - scenario.filter.slop - 1e-9;
            if aligned {
                if mutual_visibility(&truth[0], &truth[1], &world, scenario.sensors.max_range) {
                    let (h, _) = dcl::coop_measurement_model(&truth[0], &truth[1]);
                    let rho = (h.norm() + n_rho.sample(&mut coop_rng)).max(1e-6);
                    let phi = wrap_finite(h.y.atan2(h.x) + n_phi.sample(&mut coop_rng));
                    let z = RangeBearing::new(rho, phi, t_lidar, r_polar)?;
                    events.push(Event::Coop { z });
                }
                let mut obs = Vec::new();
                for (idx, lm) in world.landmarks.iter().enumerate() {
                    if landmark_visible(&truth[0], lm, &world, scenario.sensors.max_range) {
                        let (hh, _) = dcl::landmark_measurement_model(&truth[0], lm);
                        let rho = (hh.norm() + n_rho.sample(&mut lm_rng)).max(1e-6);
                        let phi = wrap_finite(hh.y.atan2(hh.x) + n_phi.sample(&mut lm_rng));
                        obs.push((idx, RangeBearing::new(rho, phi, t_lidar, r_polar)?));
                    }
                }
                if !obs.is_empty() {
                    events.push(Event::Landmarks { stamp: t_lidar, obs });
                }
                events.push(Event::Log {
                    stamp: t_lidar,
                    truth1: truth[0],
                    truth2: truth[1],
                });
            }
            m += 1;
        }
    }

    Ok(Timeline {
        events,
        prediction_steps: steps,
        init_mean,
        init_cov,
    })
}

/// Zip both robots' scheduled predictions into shared `Predict` events,
/// move ground truth in lockstep (noiseless program value at each step's
/// end stamp), and corrupt the filter-side controls with fresh per-step
/// noise.
#[allow(clippy::too_many_arguments)]
fn emit_predicts(
    events: &mut Vec<Event>,
    truth: &mut [Pose2; 2],
    programs: [&super::scenario::ControlProgram; 2],
    actions: [Vec<Action>; 2],
    enc_rng: &mut [ChaCha12Rng; 2],
    n_v: &Normal<f64>,
    n_w: &Normal<f64>,
) -> Result<()> {
    let [a1, a2] = actions;
    if a1.len() != a2.len() {
        return Err(Error::InvalidStream(format!(
            "scheduler divergence: {} vs {} actions",
            a1.len(),
            a2.len()
        )));
    }
    for (act1, act2) in a1.into_iter().zip(a2) {
        match (act1, act2) {
            (
                Action::Predict { control: u1, dt: dt1, q_scale: qs1 },
                Action::Predict { control: u2, dt: dt2, q_scale: qs2 },
            ) => {
                if (dt1 - dt2).abs() > 1e-9 || (u1.stamp - u2.stamp).abs() > 1e-9 {
                    return Err(Error::InvalidStream(
                        "scheduler stamps diverged between robots".into(),
                    ));
                }
                let stamp = u1.stamp;
                let mut noisy = [u1, u2];
                for i in 0..2 {
                    let (v, w) = programs[i].eval(stamp);
                    truth[i] =
                        motion::propagate(&truth[i], &ControlInput::new(v, w, stamp), dt1)?;
                    noisy[i].v += n_v.sample(&mut enc_rng[i]);
                    noisy[i].omega += n_w.sample(&mut enc_rng[i]);
                }
                events.push(Event::Predict {
                    stamp,
                    dt: dt1,
                    u1: noisy[0],
                    u2: noisy[1],
                    q_scale: qs1.max(qs2),
                });
            }
            _ => {
                return Err(Error::InvalidStream(
                    "unexpected update action during stream build".into(),
                ))
            }
        }
    }
    Ok(())
}

/// Trajectory log plus traffic counters for one method over one trial.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub rows: [Vec<LogRow>; 2],
    pub ledger: Option<BandwidthLedger>,
    pub skipped_updates: u32,
}

struct GateCheck {
    threshold: f64,
}

impl GateCheck {
    /// Polar-space gate of a Cartesian innovation model. Singular innovation
    /// covariances count as rejects.
    fn accept(&self, z: &RangeBearing, h: &Vector2<f64>, s_cart: &Matrix2<f64>) -> bool {
        match dcl::to_polar_for_gate(h, s_cart, z.stamp) {
            Ok((pred, s_polar)) => {
                sensors::gate(z, &pred, &s_polar, self.threshold).unwrap_or(false)
            }
            Err(_) => false,
        }
    }
}

/// Replay the timeline through one estimator.
pub fn run_method(scenario: &Scenario, timeline: &Timeline, method: Method, seed: u64) -> Result<MethodRun> {
    let q = scenario.noise.q_matrix();
    let gate = GateCheck {
        threshold: scenario.filter.gate_threshold,
    };
    let touch_cross = scenario.filter.private_update_touches_cross;
    let latency_steps = match method {
        Method::Ccl | Method::CclLm => scenario.filter.ccl_latency_steps,
        _ => 0,
    };
    let latency = latency_steps as f64 * scenario.time.dt;
    let mut skipped = 0u32;

    // Per-method state.
    let mut solos = [
        SoloBelief::new(timeline.init_mean[0], timeline.init_cov[0], 0.0),
        SoloBelief::new(timeline.init_mean[1], timeline.init_cov[1], 0.0),
    ];
    let mut dcl_beliefs = [
        RobotBelief::new(timeline.init_mean[0], timeline.init_cov[0], CrossFactor::zeros(), 0.0),
        RobotBelief::new(timeline.init_mean[1], timeline.init_cov[1], CrossFactor::identity(), 0.0),
    ];
    let mut joint = JointBelief::new(
        timeline.init_mean[0],
        timeline.init_mean[1],
        &timeline.init_cov[0],
        &timeline.init_cov[1],
        0.0,
    );
    let mut link = Link::new(scenario.link.clone(), seed ^ LINK_SEED_SALT);
    // Centralized corrections waiting out their transport delay.
    let mut pending_coop: Vec<(f64, RangeBearing)> = Vec::new();
    let mut pending_lm: Vec<(f64, usize, RangeBearing)> = Vec::new();

    let decentralized = matches!(method, Method::Dcl | Method::DclLm);
    let centralized = matches!(method, Method::Ccl | Method::CclLm);
    let landmarks: Vec<[f64; 2]> = scenario.world.landmarks.clone();

    let mut rows: [Vec<LogRow>; 2] = [Vec::new(), Vec::new()];

    // Apply every delayed correction due by `now`. The beliefs must already
    // be predicted to `now`: a correction arriving d steps late acts on the
    // state as it then stands, with no re-filtering.
    let deliver_due = |now: f64,
                       dcl_beliefs: &mut [RobotBelief; 2],
                       joint: &mut JointBelief,
                       link: &mut Link,
                       pending_coop: &mut Vec<(f64, RangeBearing)>,
                       pending_lm: &mut Vec<(f64, usize, RangeBearing)>,
                       skipped: &mut u32| {
        if decentralized {
            for packet in link.poll(now) {
                match dcl::coop_update_responder(&dcl_beliefs[1], &packet) {
                    Ok(updated) => dcl_beliefs[1] = updated,
                    Err(_) => *skipped += 1,
                }
            }
        }
        if centralized {
            let due_coop: Vec<_> = pending_coop
                .iter()
                .filter(|(due, _)| *due <= now + 1e-12)
                .map(|(_, z)| *z)
                .collect();
            pending_coop.retain(|(due, _)| *due > now + 1e-12);
            for z in due_coop {
                let (_, r_cart) = dcl::polar_to_cartesian(&z);
                let (h, s) = baselines::ccl_innovation(joint, &r_cart);
                if gate.accept(&z, &h, &s) {
                    match baselines::ccl_update(joint, &z) {
                        Ok(j) => *joint = j,
                        Err(_) => *skipped += 1,
                    }
                } else {
                    *skipped += 1;
                }
            }
            if method == Method::CclLm {
                let due_lm: Vec<_> = pending_lm
                    .iter()
                    .filter(|(due, _, _)| *due <= now + 1e-12)
                    .map(|(_, i, z)| (*i, *z))
                    .collect();
                pending_lm.retain(|(due, _, _)| *due > now + 1e-12);
                for (idx, z) in due_lm {
                    let lm = &landmarks[idx];
                    let (h, h_l) = dcl::landmark_measurement_model(&joint.mean1, lm);
                    let (_, r_cart) = dcl::polar_to_cartesian(&z);
                    let s = h_l * joint.p11() * h_l.transpose() + r_cart;
                    if gate.accept(&z, &h, &s) {
                        match baselines::ccl_lm_update(joint, &z, lm) {
                            Ok(j) => *joint = j,
                            Err(_) => *skipped += 1,
                        }
                    } else {
                        *skipped += 1;
                    }
                }
            }
        }
    };

    for ev in &timeline.events {
        let now = match ev {
            Event::Predict { stamp, .. } => *stamp,
            Event::Coop { z } => z.stamp,
            Event::Landmarks { stamp, .. } => *stamp,
            Event::Log { stamp, .. } => *stamp,
        };
        // Deliveries happen once the belief stands at `now`: for prediction
        // events that is after the step, for everything else before it.
        if !matches!(ev, Event::Predict { .. }) {
            deliver_due(
                now,
                &mut dcl_beliefs,
                &mut joint,
                &mut link,
                &mut pending_coop,
                &mut pending_lm,
                &mut skipped,
            );
        }

        match ev {
            Event::Predict { stamp, dt, u1, u2, q_scale } => {
                let us = [u1, u2];
                match method {
                    Method::Dr | Method::Sl => {
                        for i in 0..2 {
                            solos[i] = baselines::dr_step(&solos[i], us[i], *dt, &q, *q_scale)?;
                        }
                    }
                    Method::Dcl | Method::DclLm => {
                        for i in 0..2 {
                            dcl_beliefs[i] = dcl::predict(&dcl_beliefs[i], us[i], *dt, &q, *q_scale)?;
                        }
                    }
                    Method::Ccl | Method::CclLm => {
                        joint = baselines::ccl_predict(&joint, u1, u2, *dt, &q, &q, *q_scale)?;
                    }
                }
                deliver_due(
                    *stamp,
                    &mut dcl_beliefs,
                    &mut joint,
                    &mut link,
                    &mut pending_coop,
                    &mut pending_lm,
                    &mut skipped,
                );
            }
            Event::Coop { z } => {
                if decentralized {
                    if !link.model.available(z.stamp) {
                        // The whole exchange needs the channel; count the
                        // attempt and move on.
                        link.ledger.packets_sent += 1;
                        skipped += 1;
                    } else {
                        let companion = CompanionState::from(&dcl_beliefs[1]);
                        let (h, jac) = dcl::coop_measurement_model(
                            &dcl_beliefs[0].mean,
                            &companion.mean,
                        );
                        let (_, r_cart) = dcl::polar_to_cartesian(z);
                        let s = dcl::coop_innovation_cov(&dcl_beliefs[0], &companion, &jac, &r_cart);
                        if gate.accept(z, &h, &s) {
                            match dcl::coop_update_initiator(&dcl_beliefs[0], &companion, z) {
                                Ok((updated, packet)) => {
                                    dcl_beliefs[0] = updated;
                                    if let SendOutcome::Scheduled { .. } =
                                        link.try_send(packet, z.stamp)
                                    {
                                        for packet in link.poll(z.stamp) {
                                            match dcl::coop_update_responder(&dcl_beliefs[1], &packet) {
                                                Ok(updated) => dcl_beliefs[1] = updated,
                                                Err(_) => skipped += 1,
                                            }
                                        }
                                    }
                                }
                                Err(_) => skipped += 1,
                            }
                        } else {
                            skipped += 1;
                        }
                    }
                }
                if centralized && link.model.available(z.stamp) {
                    // Centralized corrections ride the same radio: the
                    // measurement reaches the fusion center only when the
                    // link is up, and is applied one transport delay later.
                    pending_coop.push((z.stamp + latency, *z));
                }
            }
            Event::Landmarks { stamp, obs } => match method {
                Method::Sl => {
                    for (idx, z) in obs {
                        let lm = &landmarks[*idx];
                        let (h, h_l) = dcl::landmark_measurement_model(&solos[0].mean, lm);
                        let (_, r_cart) = dcl::polar_to_cartesian(z);
                        let s = h_l * solos[0].cov.matrix() * h_l.transpose() + r_cart;
                        if gate.accept(z, &h, &s) {
                            match baselines::sl_update(&solos[0], z, lm) {
                                Ok(b) => solos[0] = b,
                                Err(_) => skipped += 1,
                            }
                        } else {
                            skipped += 1;
                        }
                    }
                }
                Method::DclLm => {
                    for (idx, z) in obs {
                        let lm = &landmarks[*idx];
                        let (h, h_l) = dcl::landmark_measurement_model(&dcl_beliefs[0].mean, lm);
                        let (_, r_cart) = dcl::polar_to_cartesian(z);
                        let s = h_l * dcl_beliefs[0].cov.matrix() * h_l.transpose() + r_cart;
                        if gate.accept(z, &h, &s) {
                            match dcl::private_update(&dcl_beliefs[0], z, lm, touch_cross) {
                                Ok(b) => dcl_beliefs[0] = b,
                                Err(_) => skipped += 1,
                            }
                        } else {
                            skipped += 1;
                        }
                    }
                }
                Method::CclLm => {
                    if link.model.available(*stamp) {
                        for (idx, z) in obs {
                            pending_lm.push((z.stamp + latency, *idx, *z));
                        }
                    }
                }
                _ => {}
            },
            Event::Log { stamp, truth1, truth2 } => {
                let truths = [truth1, truth2];
                for i in 0..2 {
                    let (mean, cov) = match method {
                        Method::Dr | Method::Sl => (solos[i].mean, *solos[i].cov.matrix()),
                        Method::Dcl | Method::DclLm => {
                            (dcl_beliefs[i].mean, *dcl_beliefs[i].cov.matrix())
                        }
                        Method::Ccl | Method::CclLm => (joint.mean(i), joint.block(i)),
                    };
                    rows[i].push(LogRow::new(*stamp, *truths[i], mean, &cov));
                }
            }
        }
    }

    let ledger = decentralized.then_some(link.ledger);
    Ok(MethodRun {
        method,
        rows,
        ledger,
        skipped_updates: skipped,
    })
}

/// Everything produced by one trial.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub seed: u64,
    pub runs: Vec<MethodRun>,
}

pub fn run_trial(scenario: &Scenario, seed: u64) -> Result<TrialOutput> {
    let timeline = build_timeline(scenario, seed)?;
    let methods = scenario.methods()?;
    let mut runs = Vec::with_capacity(methods.len());
    for method in methods {
        runs.push(run_method(scenario, &timeline, method, seed)?);
    }
    Ok(TrialOutput { seed, runs })
}

/// Per-method results aggregated over the trial ensemble.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Ensemble-mean metrics per robot.
    pub robots: Vec<RobotMetrics>,
    /// Per-trial metrics, outer index trial, inner robot.
    pub per_trial: Vec<Vec<RobotMetrics>>,
    pub bandwidth: Option<BandwidthSummary>,
    pub skipped_updates: u32,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BandwidthSummary {
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub bytes_delivered: u64,
    /// Counterfactual periodic-broadcast bytes for the same run count.
    pub broadcast_bytes: u64,
    /// `1 - delivered / broadcast`.
    pub reduction: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub scenario: String,
    pub base_seed: u64,
    pub trials: u32,
    pub methods: Vec<MethodSummary>,
}

/// Run the trial ensemble (seeds `base_seed..base_seed+trials`) and compute
/// the aggregated report.
pub fn run_scenario(scenario: &Scenario) -> Result<(Vec<TrialOutput>, Report)> {
    let trials = scenario.run.trials;
    let mut outputs = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        outputs.push(run_trial(scenario, scenario.run.seed + t as u64)?);
    }
    let report = summarize(scenario, &outputs)?;
    Ok((outputs, report))
}

pub fn summarize(scenario: &Scenario, outputs: &[TrialOutput]) -> Result<Report> {
    let methods = scenario.methods()?;
    let mut summaries = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        let mut per_trial = Vec::new();
        let mut ledger_total = BandwidthLedger::default();
        let mut have_ledger = false;
        let mut skipped = 0;
        for out in outputs {
            let run = &out.runs[mi];
            debug_assert_eq!(run.method, *method);
            let mut robots = Vec::new();
            for i in 0..2 {
                robots.push(compute_metrics(&run.rows[i])?);
            }
            per_trial.push(robots);
            if let Some(l) = run.ledger {
                have_ledger = true;
                ledger_total.packets_sent += l.packets_sent;
                ledger_total.packets_delivered += l.packets_delivered;
                ledger_total.bytes_delivered += l.bytes_delivered;
            }
            skipped += run.skipped_updates;
        }
        let robots = (0..2)
            .map(|i| RobotMetrics::ensemble(per_trial.iter().map(|t| &t[i])))
            .collect();
        let bandwidth = have_ledger.then(|| {
            let broadcast = continuous_broadcast_cost(scenario.time.steps as u64, 2)
                * outputs.len() as u64;
            BandwidthSummary {
                packets_sent: ledger_total.packets_sent,
                packets_delivered: ledger_total.packets_delivered,
                bytes_delivered: ledger_total.bytes_delivered,
                broadcast_bytes: broadcast,
                reduction: 1.0 - ledger_total.bytes_delivered as f64 / broadcast as f64,
            }
        });
        summaries.push(MethodSummary {
            method: method.name().to_string(),
            robots,
            per_trial,
            bandwidth,
            skipped_updates: skipped,
        });
    }
    Ok(Report {
        scenario: scenario.name.clone(),
        base_seed: scenario.run.seed,
        trials: outputs.len() as u32,
        methods: summaries,
    })
}
