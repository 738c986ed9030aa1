//! Scenario configuration: world geometry, timing, sensor rates, noise,
//! link model, per-robot control programs, and run options.
//!
//! Scenario files are TOML. Angles cross the config boundary in degrees and
//! are converted to radians here; everything downstream is SI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LinkModel;
use crate::sensors::WorldModel;
use crate::types::{NoiseConfig, Pose2};

/// One piece of a piecewise-affine control program: over its duration the
/// commands ramp linearly from (`v`, `omega`) at the given rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramSegment {
    pub duration: f64,
    pub v: f64,
    pub omega: f64,
    #[serde(default)]
    pub v_rate: f64,
    #[serde(default)]
    pub omega_rate: f64,
}

/// Piecewise-affine body-frame commands, held constant past the last
/// segment's end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProgram(pub Vec<ProgramSegment>);

impl ControlProgram {
    /// Commanded (v, omega) at absolute time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let mut start = 0.0;
        let mut last = (0.0, 0.0);
        for seg in &self.0 {
            let end = start + seg.duration;
            if t < end {
                let dt = (t - start).max(0.0);
                return (seg.v + seg.v_rate * dt, seg.omega + seg.omega_rate * dt);
            }
            last = (
                seg.v + seg.v_rate * seg.duration,
                seg.omega + seg.omega_rate * seg.duration,
            );
            start = end;
        }
        last
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config(path, "control program must not be empty"));
        }
        for (i, seg) in self.0.iter().enumerate() {
            if !(seg.duration > 0.0) {
                return Err(Error::config(
                    format!("{path}[{i}].duration"),
                    "must be > 0",
                ));
            }
            for (field, v) in [
                ("v", seg.v),
                ("omega", seg.omega),
                ("v_rate", seg.v_rate),
                ("omega_rate", seg.omega_rate),
            ] {
                if !v.is_finite() {
                    return Err(Error::config(format!("{path}[{i}].{field}"), "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Per-robot setup. `start` is `[x_m, y_m, theta_deg]`; the frame offset is
/// an extra heading rotation applied to both the true start pose and the
/// initial belief, modelling arbitrary initial orientations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub start: [f64; 3],
    #[serde(default)]
    pub frame_offset_deg: f64,
    pub program: ControlProgram,
}

impl RobotConfig {
    pub fn start_pose(&self) -> Pose2 {
        Pose2::new(
            self.start[0],
            self.start[1],
            (self.start[2] + self.frame_offset_deg).to_radians(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Wall segments `[x1, y1, x2, y2]`, meters.
    pub walls: Vec<[f64; 4]>,
    #[serde(default)]
    pub landmarks: Vec<[f64; 2]>,
    #[serde(default = "default_cylinder_radius")]
    pub cylinder_radius: f64,
}

fn default_cylinder_radius() -> f64 {
    0.06
}

impl WorldConfig {
    pub fn to_model(&self) -> WorldModel {
        WorldModel {
            walls: self
                .walls
                .iter()
                .map(|w| [[w[0], w[1]], [w[2], w[3]]])
                .collect(),
            landmarks: self.landmarks.clone(),
            cylinder_radius: self.cylinder_radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    /// Encoder period, seconds.
    pub dt: f64,
    /// Number of encoder steps in the run.
    pub steps: u32,
    /// Optional explicit duration; must equal `steps * dt`.
    #[serde(default)]
    pub duration: Option<f64>,
}

impl TimeConfig {
    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub lidar_hz: f64,
    /// Encoder rate implied by `time.dt`; kept for documentation and
    /// validated against it.
    pub odometry_hz: f64,
    /// Detection and visibility range limit, meters.
    pub max_range: f64,
    /// Per-beam range noise of the scanner model, meters.
    pub scan_sigma_r: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            lidar_hz: 10.0,
            odometry_hz: 6.0,
            max_range: 8.0,
            scan_sigma_r: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Mahalanobis gate threshold (chi-square, 2 dof).
    pub gate_threshold: f64,
    /// Apply the `(I - K H)` contraction to the cross factor on private
    /// landmark updates.
    pub private_update_touches_cross: bool,
    /// Inflate process noise on extrapolated sub-steps by the two-sample
    /// propagation factor.
    pub extrapolation_noise_inflation: bool,
    /// Measurement/control stamps closer than this count as simultaneous.
    pub slop: f64,
    /// Uniform initial belief error half-widths `[m, m, deg]` around the
    /// true start pose; the initial covariance matches these widths.
    pub init_jitter: [f64; 3],
    /// Centralized corrections are applied this many encoder steps late.
    pub ccl_latency_steps: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gate_threshold: crate::sensors::GATE_CHI2_99_2DOF,
            private_update_touches_cross: true,
            extrapolation_noise_inflation: false,
            slop: 0.02,
            init_jitter: [0.03, 0.03, 3.0],
            ccl_latency_steps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: u32,
    pub methods: Vec<String>,
    /// Scales injected sensor noise; 0 gives noiseless streams while the
    /// filters keep their configured covariances.
    #[serde(default = "default_injection")]
    pub noise_injection_scale: f64,
    /// Per-trial variation of the true start poses, uniform half-widths
    /// `[m, m, deg]`; models the protocol of starting each trial from a
    /// different place.
    #[serde(default = "default_start_variation")]
    pub start_variation: [f64; 3],
}

fn default_injection() -> f64 {
    1.0
}

fn default_start_variation() -> [f64; 3] {
    [0.5, 0.5, 30.0]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            trials: 10,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            noise_injection_scale: 1.0,
            start_variation: default_start_variation(),
        }
    }
}

/// The six estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Dr,
    Sl,
    Ccl,
    Dcl,
    CclLm,
    DclLm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dr,
        Method::Sl,
        Method::Ccl,
        Method::Dcl,
        Method::CclLm,
        Method::DclLm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dr => "dr",
            Method::Sl => "sl",
            Method::Ccl => "ccl",
            Method::Dcl => "dcl",
            Method::CclLm => "ccl-lm",
            Method::DclLm => "dcl-lm",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "run.methods",
                    format!(
                        "unknown method `{s}` (expected one of dr, sl, ccl, dcl, ccl-lm, dcl-lm)"
                    ),
                )
            })
    }
}

/// Full scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub world: WorldConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub link: LinkModel,
    pub robot1: RobotConfig,
    pub robot2: RobotConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_name() -> String {
    "unnamed".to_string()
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config {
            path: "<toml>".into(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn lidar_period(&self) -> f64 {
        1.0 / self.sensors.lidar_hz
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.run.methods.iter().map(|s| Method::parse(s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time.dt > 0.0) {
            return Err(Error::config("time.dt", "must be > 0"));
        }
        if self.time.steps == 0 {
            return Err(Error::config("time.steps", "must be >= 1"));
        }
        if let Some(d) = self.time.duration {
            if (d - self.time.duration()).abs() > 1e-9 {
                return Err(Error::config(
                    "time.duration",
                    format!(
                        "must equal steps * dt = {} (got {d})",
                        self.time.duration()
                    ),
                ));
            }
        }
        if !(self.sensors.lidar_hz > 0.0) {
            return Err(Error::config("sensors.lidar_hz", "must be > 0"));
        }
        if !(self.sensors.odometry_hz > 0.0) {
            return Err(Error::config("sensors.odometry_hz", "must be > 0"));
        }
        if !(self.sensors.max_range > 0.0) {
            return Err(Error::config("sensors.max_range", "must be > 0"));
        }
        if self.sensors.scan_sigma_r < 0.0 {
            return Err(Error::config("sensors.scan_sigma_r", "must be >= 0"));
        }
        self.noise.validate()?;
        self.link.validate()?;
        self.world.to_model().validate()?;
        if self.world.walls.is_empty() {
            return Err(Error::config("world.walls", "need at least the room outline"));
        }
        self.robot1.program.validate("robot1.program")?;
        self.robot2.program.validate("robot2.program")?;
        for (path, rc) in [("robot1", &self.robot1), ("robot2", &self.robot2)] {
            let p = rc.start_pose();
            if !p.is_finite() {
                return Err(Error::config(format!("{path}.start"), "must be finite"));
            }
            let world = self.world.to_model();
            if !world.contains(&p.position().into()) {
                return Err(Error::config(
                    format!("{path}.start"),
                    "start pose outside the world bounds",
                ));
            }
        }
        if !(self.filter.gate_threshold > 0.0) {
            return Err(Error::config("filter.gate_threshold", "must be > 0"));
        }
        if !(self.filter.slop >= 0.0) {
            return Err(Error::config("filter.slop", "must be >= 0"));
        }
        if self.filter.init_jitter.iter().any(|v| *v < 0.0) {
            return Err(Error::config("filter.init_jitter", "must be >= 0"));
        }
        if self.run.trials == 0 {
            return Err(Error::config("run.trials", "must be >= 1"));
        }
        if !(self.run.noise_injection_scale >= 0.0) {
            return Err(Error::config("run.noise_injection_scale", "must be >= 0"));
        }
        self.methods()?;
        Ok(())
    }
}

/// The stock two-robot scenario: a 6 x 7 m room with an interior wall that
/// breaks line of sight intermittently, four known landmarks, S-curve
/// programs with an early sharp-turn segment for each robot, encoder steps
/// of 0.166 s over 130 steps, and a 10 Hz detection grid.
pub fn default_scenario() -> Scenario {
    Scenario {
        name: "default".to_string(),
        world: WorldConfig {
            walls: vec![
                [0.0, 0.0, 6.0, 0.0],
                [6.0, 0.0, 6.0, 7.0],
                [6.0, 7.0, 0.0, 7.0],
                [0.0, 7.0, 0.0, 0.0],
            ],
            landmarks: vec![[1.0, 1.0], [5.0, 1.0], [1.0, 6.0], [5.0, 6.0]],
            cylinder_radius: 0.06,
        },
        time: TimeConfig {
            dt: 0.166,
            steps: 130,
            duration: None,
        },
        sensors: SensorConfig::default(),
        // Calibrated encoders: tighter than the conservative type-level
        // defaults, and injected at exactly this level so the filters stay
        // statistically consistent.
        noise: NoiseConfig {
            q_v: 0.0025,
            q_omega: 0.0049,
            // Field-sensor grade range/bearing noise rather than the tight
            // type-level defaults.
            r_range: 0.0004,
            r_bearing: (2.0f64 * std::f64::consts::PI / 180.0) * (2.0 * std::f64::consts::PI / 180.0),
        },
        link: LinkModel {
            availability: vec![
                [4.05, 4.65],
                [6.25, 6.85],
                [8.45, 9.05],
                [10.65, 11.25],
                [12.85, 13.45],
                [15.05, 15.65],
                [17.25, 17.85],
                [19.45, 20.05],
            ],
            latency: 0.0,
            drop_prob: 0.0,
        },
        robot1: RobotConfig {
            start: [1.8, 2.1, 0.0],
            frame_offset_deg: 0.0,
            program: ControlProgram(vec![
                ProgramSegment { duration: 1.0, v: 0.30, omega: 0.0, v_rate: 0.0, omega_rate: 0.0 },
                ProgramSegment { duration: 0.5, v: 0.30, omega: 0.0, v_rate: -0.20, omega_rate: 2.0 },
                ProgramSegment { duration: 2.0, v: 0.20, omega: 1.0, v_rate: 0.0, omega_rate: 0.0 },
                ProgramSegment { duration: 0.5, v: 0.20, omega: 1.0, v_rate: 0.20, omega_rate: -1.5 },
                ProgramSegment { duration: 17.58, v: 0.30, omega: 0.25, v_rate: 0.0, omega_rate: 0.0 },
            ]),
        },
        robot2: RobotConfig {
            start: [3.8, 4.4, 150.0],
            frame_offset_deg: 30.0,
            program: ControlProgram(vec![
                ProgramSegment { duration: 1.0, v: 0.30, omega: 0.0, v_rate: 0.0, omega_rate: 0.0 },
                ProgramSegment { duration: 0.5, v: 0.30, omega: 0.0, v_rate: -0.20, omega_rate: 2.0 },
                ProgramSegment { duration: 2.0, v: 0.20, omega: 1.0, v_rate: 0.0, omega_rate: 0.0 },
                ProgramSegment { duration: 0.5, v: 0.20, omega: 1.0, v_rate: 0.20, omega_rate: -1.5 },
                ProgramSegment { duration: 17.58, v: 0.30, omega: 0.25, v_rate: 0.0, omega_rate: 0.0 },
            ]),
        },
        filter: FilterConfig::default(),
        run: RunConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        default_scenario().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let s = default_scenario();
        let text = s.to_toml();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut s = default_scenario();
        s.time.dt = 0.0;
        match s.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "time.dt"),
            other => panic!("expected config error, got {other:?}"),
        }
        let mut s = default_scenario();
        s.noise.q_v = -1.0;
        match s.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "noise.q_v"),
            other => panic!("expected config error, got {other:?}"),
        }
        let mut s = default_scenario();
        s.run.methods = vec!["dcl".into(), "warp-drive".into()];
        assert!(s.validate().is_err());
    }

    #[test]
    fn program_eval_is_piecewise_affine() {
        let p = ControlProgram(vec![
            ProgramSegment { duration: 2.0, v: 0.1, omega: 0.0, v_rate: 0.05, omega_rate: 0.0 },
            ProgramSegment { duration: 1.0, v: 0.4, omega: 1.0, v_rate: 0.0, omega_rate: -0.5 },
        ]);
        assert_eq!(p.eval(0.0), (0.1, 0.0));
        assert_eq!(p.eval(1.0), (0.1 + 0.05, 0.0));
        assert_eq!(p.eval(2.5), (0.4, 1.0 - 0.25));
        // Held at the final values past the end.
        assert_eq!(p.eval(10.0), (0.4, 0.5));
    }

    #[test]
    fn duration_mismatch_rejected() {
        let mut s = default_scenario();
        s.time.duration = Some(5.0);
        assert!(s.validate().is_err());
        s.time.duration = Some(s.time.duration());
        s.validate().unwrap();
    }
}
