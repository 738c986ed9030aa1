//! Browser bindings: a trajectory explorer over the scenario harness and a
//! LiDAR segmentation playground. All exports speak JSON strings so the
//! page needs no generated types.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use coloc::harness::{default_scenario, run_trial, Method};
use coloc::sensors::{self, LidarConfig, SegmentKind, WorldModel};
use coloc::types::Pose2;

#[derive(Debug, Serialize, Deserialize)]
pub struct DemoConfig {
    pub seed: u64,
    /// Scales injected sensor noise (the filters keep their tuning).
    pub noise_scale: f64,
    /// Transport delay of centralized corrections, in encoder steps.
    pub ccl_latency_steps: u32,
    /// Packet loss on the inter-robot link.
    pub drop_prob: f64,
    pub methods: Vec<String>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 42,
            noise_scale: 1.0,
            ccl_latency_steps: 1,
            drop_prob: 0.0,
            methods: vec!["dr".into(), "ccl".into(), "dcl".into(), "dcl-lm".into()],
        }
    }
}

#[derive(Debug, Serialize)]
struct TrackPoint {
    x: f64,
    y: f64,
    theta: f64,
    p_xx: f64,
    p_yy: f64,
}

#[derive(Debug, Serialize)]
struct MethodOut {
    name: String,
    robots: [Vec<TrackPoint>; 2],
    rmse_pos: [f64; 2],
    nees_mean: [f64; 2],
    bandwidth: Option<(u64, u64, u64)>,
}

#[derive(Debug, Serialize)]
struct DemoOut {
    walls: Vec<[f64; 4]>,
    landmarks: Vec<[f64; 2]>,
    windows: Vec<[f64; 2]>,
    stamps: Vec<f64>,
    truth: [Vec<[f64; 3]>; 2],
    methods: Vec<MethodOut>,
    broadcast_bytes: u64,
}

pub fn simulate_impl(config: &DemoConfig) -> Result<String, String> {
    let mut scenario = default_scenario();
    scenario.run.seed = config.seed;
    scenario.run.trials = 1;
    scenario.run.noise_injection_scale = config.noise_scale.max(0.0);
    scenario.filter.ccl_latency_steps = config.ccl_latency_steps;
    scenario.link.drop_prob = config.drop_prob.clamp(0.0, 0.999);
    scenario.run.methods = config.methods.clone();
    scenario.validate().map_err(|e| e.to_string())?;

    let out = run_trial(&scenario, scenario.run.seed).map_err(|e| e.to_string())?;

    let mut stamps = Vec::new();
    let mut truth: [Vec<[f64; 3]>; 2] = [Vec::new(), Vec::new()];
    if let Some(first) = out.runs.first() {
        for row in &first.rows[0] {
            stamps.push(row.stamp);
        }
        for robot in 0..2 {
            for row in &first.rows[robot] {
                truth[robot].push([row.truth.x, row.truth.y, row.truth.theta]);
            }
        }
    }

    let mut methods = Vec::new();
    for run in &out.runs {
        let mut robots: [Vec<TrackPoint>; 2] = [Vec::new(), Vec::new()];
        let mut rmse = [0.0; 2];
        let mut nees = [0.0; 2];
        for robot in 0..2 {
            for row in &run.rows[robot] {
                robots[robot].push(TrackPoint {
                    x: row.est.x,
                    y: row.est.y,
                    theta: row.est.theta,
                    p_xx: row.p_xx,
                    p_yy: row.p_yy,
                });
            }
            let m = coloc::harness::compute_metrics(&run.rows[robot]).map_err(|e| e.to_string())?;
            rmse[robot] = m.rmse_pos;
            nees[robot] = m.nees_mean;
        }
        methods.push(MethodOut {
            name: run.method.name().to_string(),
            robots,
            rmse_pos: rmse,
            nees_mean: nees,
            bandwidth: run
                .ledger
                .map(|l| (l.packets_sent, l.packets_delivered, l.bytes_delivered)),
        });
    }

    let demo = DemoOut {
        walls: scenario.world.walls.clone(),
        landmarks: scenario.world.landmarks.clone(),
        windows: scenario.link.availability.clone(),
        stamps,
        truth,
        methods,
        broadcast_bytes: coloc::network::continuous_broadcast_cost(scenario.time.steps as u64, 2),
    };
    serde_json::to_string(&demo).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanConfig {
    pub observer: [f64; 3],
    pub companion: [f64; 2],
    pub sigma_r: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            observer: [2.2, 3.0, 20.0],
            companion: [4.0, 3.8],
            sigma_r: 0.02,
            seed: 7,
        }
    }
}

#[derive(Debug, Serialize)]
struct ScanOut {
    walls: Vec<[f64; 4]>,
    observer: [f64; 3],
    companion: [f64; 2],
    /// Per-beam world-frame hit points; no-return beams are omitted.
    points: Vec<[f64; 2]>,
    /// Segment index per point, aligned with `points`.
    segment_of: Vec<i32>,
    kinds: Vec<String>,
    detection: Option<[f64; 2]>,
    truth: [f64; 2],
}

pub fn scan_impl(config: &ScanConfig) -> Result<String, String> {
    let world = WorldModel::room(6.0, 7.0);
    let observer = Pose2::new(
        config.observer[0],
        config.observer[1],
        config.observer[2].to_radians(),
    );
    let companion = Pose2::new(config.companion[0], config.companion[1], 0.0);
    let cfg = LidarConfig {
        n_beams: 360,
        max_range: 8.0,
        sigma_r: config.sigma_r.max(0.0),
    };
    let scan = sensors::render_scan(&world, &observer, Some(&companion), &cfg, 0.0, config.seed)
        .map_err(|e| e.to_string())?;
    let segments =
        sensors::abd_segment(&scan, 10f64.to_radians(), scan.sigma_r).map_err(|e| e.to_string())?;
    let detection = sensors::extract_cylinder(&scan, &segments, world.cylinder_radius);

    let mut points = Vec::new();
    let mut segment_of = Vec::new();
    for (si, seg) in segments.iter().enumerate() {
        for i in seg.start..=seg.end {
            let local = scan.point(i);
            // Scan points are in the sensor frame; lift to world.
            let (s, c) = observer.theta.sin_cos();
            points.push([
                observer.x + c * local.x - s * local.y,
                observer.y + s * local.x + c * local.y,
            ]);
            segment_of.push(si as i32);
        }
    }
    let kinds = segments
        .iter()
        .map(|s| {
            match s.kind {
                SegmentKind::LineLike => "line",
                SegmentKind::ArcLike => "arc",
                SegmentKind::Unknown => "unknown",
            }
            .to_string()
        })
        .collect();

    let dx = companion.x - observer.x;
    let dy = companion.y - observer.y;
    let truth = [
        (dx * dx + dy * dy).sqrt(),
        coloc::wrap_angle(dy.atan2(dx) - observer.theta).map_err(|e| e.to_string())?,
    ];
    let out = ScanOut {
        walls: world
            .walls
            .iter()
            .map(|w| [w[0][0], w[0][1], w[1][0], w[1][1]])
            .collect(),
        observer: config.observer,
        companion: config.companion,
        points,
        segment_of,
        kinds,
        detection: detection.map(|d| [d.rho, d.phi]),
        truth,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Run one trial of the stock scenario with the given knobs and return the
/// tracks, metrics, and traffic counters as JSON.
#[wasm_bindgen]
pub fn simulate(config_json: &str) -> Result<String, JsValue> {
    let config: DemoConfig =
        serde_json::from_str(config_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    simulate_impl(&config).map_err(|e| JsValue::from_str(&e))
}

/// Render one scan, segment it, and extract the cylindrical marker.
#[wasm_bindgen]
pub fn lidar_scan(config_json: &str) -> Result<String, JsValue> {
    let config: ScanConfig =
        serde_json::from_str(config_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    scan_impl(&config).map_err(|e| JsValue::from_str(&e))
}

/// Default knob settings for both panels.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::json!({
        "simulate": DemoConfig::default(),
        "scan": ScanConfig::default(),
        "method_names": Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>(),
    })
    .to_string()
}
