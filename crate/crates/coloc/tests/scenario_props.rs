//! Scenario-level properties of the harness and estimator stack.

mod common;

use coloc::harness::{default_scenario, run_scenario, run_trial, Method, Scenario};

use common::{method_metrics, scenario_with};

/// Apply a rigid transform (rotation about the origin plus translation) to
/// everything that defines the world frame of a scenario.
fn transform_scenario(mut s: Scenario, angle_deg: f64, shift: [f64; 2]) -> Scenario {
    let a = angle_deg.to_radians();
    let (sin, cos) = a.sin_cos();
    let rot = |p: [f64; 2]| {
        [
            cos * p[0] - sin * p[1] + shift[0],
            sin * p[0] + cos * p[1] + shift[1],
        ]
    };
    for w in &mut s.world.walls {
        let p1 = rot([w[0], w[1]]);
        let p2 = rot([w[2], w[3]]);
        *w = [p1[0], p1[1], p2[0], p2[1]];
    }
    for lm in &mut s.world.landmarks {
        *lm = rot(*lm);
    }
    for rc in [&mut s.robot1, &mut s.robot2] {
        let p = rot([rc.start[0], rc.start[1]]);
        rc.start = [p[0], p[1], rc.start[2] + angle_deg];
    }
    s
}

/// Expressing the scenario in a rotated, shifted frame leaves the position
/// errors untouched: the measurement model only ever sees relative
/// quantities.
#[test]
fn frame_offset_invariance() {
    let mut base = scenario_with(&[Method::Dcl]);
    base.run.trials = 1;
    let rotated = transform_scenario(base.clone(), 73.0, [11.0, -4.0]);

    let out_a = run_trial(&base, base.run.seed).unwrap();
    let out_b = run_trial(&rotated, base.run.seed).unwrap();
    for robot in 0..2 {
        let rows_a = &out_a.runs[0].rows[robot];
        let rows_b = &out_b.runs[0].rows[robot];
        assert_eq!(rows_a.len(), rows_b.len());
        for (a, b) in rows_a.iter().zip(rows_b) {
            let ea = ((a.est.x - a.truth.x).powi(2) + (a.est.y - a.truth.y).powi(2)).sqrt();
            let eb = ((b.est.x - b.truth.x).powi(2) + (b.est.y - b.truth.y).powi(2)).sqrt();
            assert!(
                (ea - eb).abs() <= 1e-6 * ea.abs().max(1e-6),
                "error magnitude changed under frame transform: {ea} vs {eb}"
            );
        }
    }
}

/// Between cooperative exchanges the uncertainty only breathes outward.
#[test]
fn uncertainty_grows_between_exchanges() {
    let mut s = scenario_with(&[Method::Dcl]);
    s.run.trials = 1;
    let out = run_trial(&s, s.run.seed).unwrap();
    let windows = s.link.availability.clone();
    let in_window = |t: f64| windows.iter().any(|w| t >= w[0] && t <= w[1]);
    let mut checked = 0;
    for robot in 0..2 {
        let rows = &out.runs[0].rows[robot];
        for pair in rows.windows(2) {
            // Only prediction happens over this gap when no exchange
            // window intersects it.
            let gap_clear = !in_window(pair[1].stamp)
                && windows
                    .iter()
                    .all(|w| w[1] < pair[0].stamp || w[0] > pair[1].stamp);
            if gap_clear {
                let tr0 = pair[0].p_xx + pair[0].p_yy + pair[0].p_tt;
                let tr1 = pair[1].p_xx + pair[1].p_yy + pair[1].p_tt;
                assert!(
                    tr1 >= tr0 - 1e-9,
                    "trace shrank without an update at t={}",
                    pair[1].stamp
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "too few prediction-only gaps checked: {checked}");
}

/// Delay degrades the centralized filter monotonically in the sense that
/// any stale application is worse than none.
#[test]
fn ccl_latency_strictly_degrades() {
    let rmse_for = |steps: u32| {
        let mut s = scenario_with(&[Method::Ccl]);
        s.filter.ccl_latency_steps = steps;
        let (_, report) = run_scenario(&s).unwrap();
        let m = method_metrics(&report, Method::Ccl);
        [m[0].rmse_pos, m[1].rmse_pos]
    };
    let fresh = rmse_for(0);
    for d in [1, 2, 3] {
        let stale = rmse_for(d);
        for robot in 0..2 {
            assert!(
                stale[robot] > fresh[robot],
                "latency {d}: robot {} rmse {:.4} not worse than fresh {:.4}",
                robot + 1,
                stale[robot],
                fresh[robot]
            );
        }
    }
}

/// Packet loss drops responder updates but never corrupts the estimator;
/// the factorization re-anchors at the next successful exchange.
#[test]
fn lossy_link_degrades_gracefully() {
    let mut s = scenario_with(&[Method::Dr, Method::Dcl]);
    s.link.drop_prob = 0.4;
    let (_, report) = run_scenario(&s).unwrap();
    let dcl = &report.methods[1];
    let bw = dcl.bandwidth.as_ref().unwrap();
    assert!(bw.packets_delivered < bw.packets_sent);
    assert!(bw.packets_delivered > 0);
    let dr = method_metrics(&report, Method::Dr);
    let dcl = method_metrics(&report, Method::Dcl);
    for robot in 0..2 {
        assert!(
            dcl[robot].rmse_pos < dr[robot].rmse_pos,
            "cooperation with loss stopped helping robot {}",
            robot + 1
        );
    }
}

/// Noiseless streams recover the truth exactly for every method. Controls
/// are affine here because the control extrapolation is exact only up to
/// slope breaks.
#[test]
fn zero_noise_recovers_truth() {
    let mut s = default_scenario();
    s.run.trials = 2;
    s.run.noise_injection_scale = 0.0;
    s.filter.init_jitter = [0.0, 0.0, 0.0];
    s.link.availability.clear(); // always-visible exchange
    s.filter.ccl_latency_steps = 0;
    let affine = |v: f64, omega: f64| {
        coloc::harness::ControlProgram(vec![coloc::harness::ProgramSegment {
            duration: s.time.duration(),
            v,
            omega,
            v_rate: 0.002,
            omega_rate: 0.004,
        }])
    };
    s.robot1.program = affine(0.25, 0.22);
    s.robot2.program = affine(0.23, -0.20);
    let (_, report) = run_scenario(&s).unwrap();
    for m in &report.methods {
        for (i, robot) in m.robots.iter().enumerate() {
            assert!(
                robot.rmse_x < 1e-6 && robot.rmse_y < 1e-6,
                "{} robot {}: rmse ({:.2e}, {:.2e}) not ~0 without noise",
                m.method,
                i + 1,
                robot.rmse_x,
                robot.rmse_y
            );
        }
    }
}

/// The first packet of a window after loss carries the current cross
/// block, so a missed packet never wedges the responder.
#[test]
fn duplicate_and_stale_packets_are_ignored() {
    use coloc::dcl::{coop_update_initiator, coop_update_responder, CompanionState, RobotBelief};
    use coloc::sensors::RangeBearing;
    use coloc::types::{Cov3, CrossFactor, Pose2};
    use nalgebra::Matrix2;

    let r = Matrix2::new(4e-4, 0.0, 0.0, 1.2e-3);
    let b1 = RobotBelief::new(Pose2::origin(), Cov3::from_diagonal(0.02, 0.02, 0.01), CrossFactor::zeros(), 0.0);
    let b2 = RobotBelief::new(Pose2::new(2.0, 0.3, 1.0), Cov3::from_diagonal(0.03, 0.03, 0.01), CrossFactor::identity(), 0.0);
    let z1 = RangeBearing::new(2.0, 0.1, 1.0, r).unwrap();
    let (b1, packet1) = coop_update_initiator(&b1, &CompanionState::from(&b2), &z1).unwrap();
    let b2 = coop_update_responder(&b2, &packet1).unwrap();
    // Replay is rejected and leaves the belief untouched.
    assert!(coop_update_responder(&b2, &packet1).is_err());

    // A later exchange supersedes the first even if the first was lost: the
    // packet re-factors the responder to identity against the initiator's
    // current cross block.
    let z2 = RangeBearing::new(2.02, 0.09, 2.0, r).unwrap();
    let (b1b, packet2) = coop_update_initiator(&b1, &CompanionState::from(&b2), &z2).unwrap();
    let b2b = coop_update_responder(&b2, &packet2).unwrap();
    let p12 = b1b.cross.matrix() * b2b.cross.matrix().transpose();
    assert_eq!(p12, packet2.p12);
    // And the stale first packet is still rejected afterwards.
    assert!(coop_update_responder(&b2b, &packet1).is_err());
}
