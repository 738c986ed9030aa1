//! Synthetic 2D LiDAR, adaptive-breakpoint segmentation, cylindrical
//! landmark extraction, range-bearing synthesis, and Mahalanobis gating.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Point2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_finite, Pose2};

/// Chi-square 99% quantile for 2 degrees of freedom, the default gate.
pub const GATE_CHI2_99_2DOF: f64 = 9.210340371976182;

/// A relative observation in the observer's body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBearing {
    /// Range, meters. Always > 0.
    pub rho: f64,
    /// Bearing, radians in `(-pi, pi]`.
    pub phi: f64,
    /// Measurement time, seconds.
    pub stamp: f64,
    /// 2x2 noise covariance over (rho, phi).
    pub r: Matrix2<f64>,
}

impl RangeBearing {
    pub fn new(rho: f64, phi: f64, stamp: f64, r: Matrix2<f64>) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("range {rho} must be > 0")));
        }
        if r[(0, 0)] <= 0.0 || r.determinant() <= 0.0 {
            return Err(Error::InvalidParameter(
                "measurement covariance must be positive definite".into(),
            ));
        }
        Ok(RangeBearing {
            rho,
            phi: wrap_finite(phi),
            stamp,
            r,
        })
    }
}

/// One polar scan: ordered range samples, `INFINITY` marking no-return beams.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
    /// Bearing of beam 0 in the sensor (body) frame.
    pub angle_min: f64,
    /// Angular resolution, radians per beam.
    pub angle_step: f64,
    pub stamp: f64,
    /// Per-beam range noise sigma, meters.
    pub sigma_r: f64,
}

impl LidarScan {
    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(Error::InvalidScan("empty scan".into()));
        }
        if !(self.angle_step > 0.0) {
            return Err(Error::InvalidScan(format!(
                "angle_step {} must be > 0",
                self.angle_step
            )));
        }
        if self.ranges.iter().any(|r| r.is_nan() || *r < 0.0) {
            return Err(Error::InvalidScan("negative or NaN range".into()));
        }
        Ok(())
    }

    /// Beam bearing in the sensor frame.
    pub fn angle(&self, i: usize) -> f64 {
        self.angle_min + self.angle_step * i as f64
    }

    pub fn is_return(&self, i: usize) -> bool {
        self.ranges[i].is_finite()
    }

    /// Cartesian point of beam `i` in the sensor frame.
    pub fn point(&self, i: usize) -> Point2<f64> {
        let a = self.angle(i);
        Point2::new(self.ranges[i] * a.cos(), self.ranges[i] * a.sin())
    }

    /// Fixture encoding: `angle_rad,range_m` per beam, `inf` for no-return.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_rad,range_m\n");
        for i in 0..self.ranges.len() {
            let _ = writeln!(out, "{:.9},{:.9}", self.angle(i), self.ranges[i]);
        }
        out
    }

    /// Parse a fixture produced by [`LidarScan::to_csv`].
    pub fn from_csv(text: &str, stamp: f64, sigma_r: f64) -> Result<Self> {
        let mut angles = Vec::new();
        let mut ranges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 {
                continue; // header
            }
            let mut parts = line.split(',');
            let bad = || Error::InvalidScan(format!("line {}: `{line}`", ln + 1));
            let a: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let r: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            angles.push(a);
            ranges.push(r);
        }
        if angles.len() < 2 {
            return Err(Error::InvalidScan("fixture needs at least two beams".into()));
        }
        let scan = LidarScan {
            ranges,
            angle_min: angles[0],
            angle_step: angles[1] - angles[0],
            stamp,
            sigma_r,
        };
        scan.validate()?;
        Ok(scan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    LineLike,
    ArcLike,
    Unknown,
}

/// A contiguous run of returned beams, inclusive indices into the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn span(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Arc candidates must subtend fewer beams than this.
pub const ARC_SPAN_MAX: usize = 10;
/// Accepted chord length relative to the cylinder diameter.
pub const CHORD_TOLERANCE: f64 = 0.5;

/// Static environment: wall segments, known point landmarks, and the
/// cylinder radius shared by the companion marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    /// Wall segments as endpoint pairs, meters.
    pub walls: Vec<[[f64; 2]; 2]>,
    /// Known static landmark positions.
    pub landmarks: Vec<[f64; 2]>,
    /// Cylinder radius, meters (12 cm diameter marker by default).
    pub cylinder_radius: f64,
}

impl Default for WorldModel {
    fn default() -> Self {
        WorldModel {
            walls: Vec::new(),
            landmarks: Vec::new(),
            cylinder_radius: 0.06,
        }
    }
}

impl WorldModel {
    /// Axis-aligned rectangular room `[0,w] x [0,h]`.
    pub fn room(w: f64, h: f64) -> Self {
        WorldModel {
            walls: vec![
                [[0.0, 0.0], [w, 0.0]],
                [[w, 0.0], [w, h]],
                [[w, h], [0.0, h]],
                [[0.0, h], [0.0, 0.0]],
            ],
            landmarks: Vec::new(),
            cylinder_radius: 0.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cylinder_radius > 0.0) {
            return Err(Error::config(
                "world.cylinder_radius",
                "must be > 0".to_string(),
            ));
        }
        for (i, a) in self.landmarks.iter().enumerate() {
            for b in self.landmarks.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::config(
                        "world.landmarks",
                        format!("duplicate landmark at ({}, {})", a[0], a[1]),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bounding box over all wall endpoints.
    pub fn bounds(&self) -> Option<(Point2<f64>, Point2<f64>)> {
        let mut pts = self.walls.iter().flatten();
        let first = pts.next()?;
        let (mut lo, mut hi) = (Point2::new(first[0], first[1]), Point2::new(first[0], first[1]));
        for p in pts {
            lo.x = lo.x.min(p[0]);
            lo.y = lo.y.min(p[1]);
            hi.x = hi.x.max(p[0]);
            hi.y = hi.y.max(p[1]);
        }
        Some((lo, hi))
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        match self.bounds() {
            Some((lo, hi)) => p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y,
            None => true,
        }
    }

    /// True when the open segment between the two points crosses any wall.
    pub fn occluded(&self, a: &Point2<f64>, b: &Point2<f64>) -> bool {
        self.walls
            .iter()
            .any(|w| segments_intersect(a, b, &Point2::new(w[0][0], w[0][1]), &Point2::new(w[1][0], w[1][1])))
    }
}

/// Beam-count / range envelope of the simulated scanner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub n_beams: usize,
    pub max_range: f64,
    /// Range noise sigma, meters.
    pub sigma_r: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            n_beams: 360,
            max_range: 8.0,
            sigma_r: 0.02,
        }
    }
}

/// Parametric distance along `origin + t*dir` to a wall segment, if hit.
pub(crate) fn ray_segment(origin: &Point2<f64>, dir: &Vector2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> Option<f64> {
    let seg = b - a;
    let denom = dir.x * seg.y - dir.y * seg.x;
    if denom.abs() < 1e-15 {
        return None; // parallel
    }
    let diff = a - origin;
    let t = (diff.x * seg.y - diff.y * seg.x) / denom;
    let s = (diff.x * dir.y - diff.y * dir.x) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Nearest parametric distance along the ray to a circle, if hit.
pub(crate) fn ray_circle(origin: &Point2<f64>, dir: &Vector2<f64>, center: &Point2<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    if t >= 0.0 {
        Some(t)
    } else {
        None
    }
}

/// True segment-segment intersection (proper crossing or touching).
pub(crate) fn segments_intersect(p1: &Point2<f64>, p2: &Point2<f64>, q1: &Point2<f64>, q2: &Point2<f64>) -> bool {
    let orient = |a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>| {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, d: f64| {
        d == 0.0
            && c.x >= a.x.min(b.x)
            && c.x <= a.x.max(b.x)
            && c.y >= a.y.min(b.y)
            && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Ray-cast one scan from `observer` against the walls and, when present,
/// the companion's cylindrical marker. Beams sweep the sensor frame from
/// `-pi` at the configured resolution; Gaussian range noise is seeded.
pub fn render_scan(
    world: &WorldModel,
    observer: &Pose2,
    companion: Option<&Pose2>,
    cfg: &LidarConfig,
    stamp: f64,
    rng_seed: u64,
) -> Result<LidarScan> {
    if cfg.n_beams == 0 {
        return Err(Error::InvalidParameter("zero beams requested".into()));
    }
    if !world.contains(&observer.position().into()) {
        return Err(Error::ObserverOutsideWorld);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, cfg.sigma_r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let origin = Point2::new(observer.x, observer.y);
    let step = 2.0 * PI / cfg.n_beams as f64;
    let mut ranges = Vec::with_capacity(cfg.n_beams);
    for i in 0..cfg.n_beams {
        let a = observer.theta - PI + step * i as f64;
        let dir = Vector2::new(a.cos(), a.sin());
        let mut best = f64::INFINITY;
        for w in &world.walls {
            if let Some(t) = ray_segment(&origin, &dir, &Point2::new(w[0][0], w[0][1]), &Point2::new(w[1][0], w[1][1])) {
                best = best.min(t);
            }
        }
        if let Some(c) = companion {
            if let Some(t) = ray_circle(&origin, &dir, &Point2::new(c.x, c.y), world.cylinder_radius) {
                best = best.min(t);
            }
        }
        if best <= cfg.max_range {
            ranges.push((best + noise.sample(&mut rng)).max(0.0));
        } else {
            ranges.push(f64::INFINITY);
        }
    }
    let scan = LidarScan {
        ranges,
        angle_min: -PI,
        angle_step: step,
        stamp,
        sigma_r: cfg.sigma_r,
    };
    scan.validate()?;
    Ok(scan)
}

/// Adaptive breakpoint segmentation. Consecutive returned beams stay in one
/// segment unless their Euclidean gap exceeds the range-adaptive threshold
/// `rho_i * sin(step) / sin(lambda - step) + 3 sigma_r` (threshold taken from
/// the earlier point's range); no-return beams always break segments.
/// Singletons are kept and marked `Unknown`, short runs are arc candidates.
pub fn abd_segment(scan: &LidarScan, lambda: f64, sigma_r: f64) -> Result<Vec<Segment>> {
    scan.validate()?;
    if lambda <= scan.angle_step {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} must exceed the angular resolution {}",
            scan.angle_step
        )));
    }
    let ratio = scan.angle_step.sin() / (lambda - scan.angle_step).sin();
    let n = scan.ranges.len();
    let mut segments = Vec::new();
    let mut start: Option<usize> = None;
    let classify = |s: usize, e: usize| -> Segment {
        let span = e - s + 1;
        let kind = if span == 1 {
            SegmentKind::Unknown
        } else if span < ARC_SPAN_MAX {
            SegmentKind::ArcLike
        } else {
            SegmentKind::LineLike
        };
        Segment { start: s, end: e, kind }
    };
    for i in 0..n {
        if !scan.is_return(i) {
            if let Some(s) = start.take() {
                segments.push(classify(s, i - 1));
            }
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        if i + 1 < n && scan.is_return(i + 1) {
            let r0 = scan.ranges[i];
            let r1 = scan.ranges[i + 1];
            let gap = (r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * scan.angle_step.cos())
                .max(0.0)
                .sqrt();
            let threshold = r0 * ratio + 3.0 * sigma_r;
            if gap > threshold {
                segments.push(classify(start.take().expect("open segment"), i));
            }
        }
    }
    if let Some(s) = start {
        segments.push(classify(s, n - 1));
    }
    Ok(segments)
}

/// Pick the cylindrical marker out of the segmented scan, if present.
///
/// Candidates are short arc-like segments whose chord is compatible with the
/// cylinder diameter; the center is the segment's mean point pushed outward
/// by one radius along the observer-to-point direction. A least-squares
/// circle fit is pointless at 3-8 points, so the offset fit is the only
/// strategy implemented. Returns the nearest candidate.
pub fn extract_cylinder(scan: &LidarScan, segments: &[Segment], radius: f64) -> Option<RangeBearing> {
    let max_valid = scan
        .ranges
        .iter()
        .filter(|r| r.is_finite())
        .fold(0.0f64, |m, r| m.max(*r));
    let mut best: Option<RangeBearing> = None;
    for seg in segments {
        if seg.kind != SegmentKind::ArcLike {
            continue;
        }
        let chord = (scan.point(seg.end) - scan.point(seg.start)).norm();
        let diameter = 2.0 * radius;
        if (chord - diameter).abs() > CHORD_TOLERANCE * diameter {
            continue;
        }
        let mut mean = Vector2::zeros();
        for i in seg.start..=seg.end {
            mean += scan.point(i).coords;
        }
        mean /= seg.span() as f64;
        let dist = mean.norm();
        if dist <= 0.0 {
            continue;
        }
        let center = mean + mean / dist * radius;
        let rho = center.norm();
        if rho > max_valid {
            continue;
        }
        let r = Matrix2::new(
            scan.sigma_r.max(1e-4).powi(2),
            0.0,
            0.0,
            scan.angle_step.powi(2),
        );
        let rb = match RangeBearing::new(rho, center.y.atan2(center.x), scan.stamp, r) {
            Ok(rb) => rb,
            Err(_) => continue,
        };
        if best.map_or(true, |b| rb.rho < b.rho) {
            best = Some(rb);
        }
    }
    best
}

/// Mahalanobis acceptance test of a measurement against its prediction.
/// `s` is the polar innovation covariance. Singular `s` is an error the
/// caller treats as a reject.
pub fn gate(z: &RangeBearing, predicted: &RangeBearing, s: &Matrix2<f64>, threshold: f64) -> Result<bool> {
    let inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularInnovation)?;
    let r = Vector2::new(z.rho - predicted.rho, wrap_finite(z.phi - predicted.phi));
    let d2 = (r.transpose() * inv * r)[(0, 0)];
    Ok(d2 <= threshold)
}

/// Noisy polar observation of a known static landmark from `observer`, or
/// `None` when the landmark lies beyond `max_range`.
pub fn observe_static_landmark(
    observer: &Pose2,
    landmark: &[f64; 2],
    r: &Matrix2<f64>,
    max_range: f64,
    stamp: f64,
    rng: &mut ChaCha12Rng,
) -> Option<RangeBearing> {
    let dx = landmark[0] - observer.x;
    let dy = landmark[1] - observer.y;
    let rho_true = (dx * dx + dy * dy).sqrt();
    if rho_true > max_range || rho_true <= 0.0 {
        return None;
    }
    let phi_true = wrap_finite(dy.atan2(dx) - observer.theta);
    let n_rho = Normal::new(0.0, r[(0, 0)].sqrt()).ok()?;
    let n_phi = Normal::new(0.0, r[(1, 1)].sqrt()).ok()?;
    let rho = (rho_true + n_rho.sample(rng)).max(1e-9);
    let phi = phi_true + n_phi.sample(rng);
    RangeBearing::new(rho, phi, stamp, *r).ok()
}
