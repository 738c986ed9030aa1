//! Timestamp-based buffering and control extrapolation.
//!
//! Encoders and LiDAR run at different rates, so a measurement at `t_L`
//! usually lands between two encoder samples. The scheduler replays every
//! buffered control up to `t_L` as prediction steps, then closes the gap from
//! the newest encoder stamp to `t_L` with a forward extrapolation of the last
//! two samples, and only then applies the measurement. The extrapolation is
//! exact for controls that are affine in time.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::ControlInput;

/// Anything carrying a timestamp in seconds.
pub trait Stamped {
    fn stamp(&self) -> f64;
}

impl Stamped for ControlInput {
    fn stamp(&self) -> f64 {
        self.stamp
    }
}

impl Stamped for crate::sensors::RangeBearing {
    fn stamp(&self) -> f64 {
        self.stamp
    }
}

/// Per-stream FIFO that enforces stamp ordering: pushes must be monotone
/// non-decreasing and pops never return an item older than the last pop.
#[derive(Debug, Clone)]
pub struct StampedQueue<T: Stamped> {
    items: VecDeque<T>,
    last_pushed: f64,
    last_popped: f64,
}

impl<T: Stamped> Default for StampedQueue<T> {
    fn default() -> Self {
        StampedQueue {
            items: VecDeque::new(),
            last_pushed: f64::NEG_INFINITY,
            last_popped: f64::NEG_INFINITY,
        }
    }
}

impl<T: Stamped> StampedQueue<T> {
    pub fn push(&mut self, item: T) -> Result<()> {
        let s = item.stamp();
        if !s.is_finite() {
            return Err(Error::InvalidStream(format!("non-finite stamp {s}")));
        }
        if s < self.last_pushed {
            return Err(Error::InvalidStream(format!(
                "stamp {s} regresses below {}",
                self.last_pushed
            )));
        }
        self.last_pushed = s;
        self.items.push_back(item);
        Ok(())
    }

    pub fn front_stamp(&self) -> Option<f64> {
        self.items.front().map(|i| i.stamp())
    }

    pub fn pop(&mut self) -> Option<T> {
        let item = self.items.pop_front()?;
        debug_assert!(item.stamp() >= self.last_popped);
        self.last_popped = item.stamp();
        Some(item)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Forward extrapolation of a control stream to `t_target`:
/// `u(t) = u_curr + (u_curr - u_prev)/(t_curr - t_prev) * (t - t_curr)`,
/// applied componentwise to `v` and `omega`.
pub fn extrapolate_control(
    u_prev: &ControlInput,
    u_curr: &ControlInput,
    t_target: f64,
) -> Result<ControlInput> {
    let gap = u_curr.stamp - u_prev.stamp;
    if gap <= 0.0 {
        return Err(Error::InvalidStream(format!(
            "control stamps not increasing: {} then {}",
            u_prev.stamp, u_curr.stamp
        )));
    }
    if t_target < u_curr.stamp {
        return Err(Error::InvalidStream(format!(
            "extrapolation target {t_target} precedes newest sample {}",
            u_curr.stamp
        )));
    }
    let lead = t_target - u_curr.stamp;
    Ok(ControlInput {
        v: u_curr.v + (u_curr.v - u_prev.v) / gap * lead,
        omega: u_curr.omega + (u_curr.omega - u_prev.omega) / gap * lead,
        stamp: t_target,
    })
}

/// One scheduled filter action. `Predict` carries the effective control for
/// the step ending at `control.stamp`; `q_scale` inflates the process noise
/// for extrapolated sub-steps when enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Predict {
        control: ControlInput,
        dt: f64,
        q_scale: f64,
    },
    Update {
        stamp: f64,
    },
}

impl Action {
    pub fn stamp(&self) -> f64 {
        match self {
            Action::Predict { control, .. } => control.stamp,
            Action::Update { stamp } => *stamp,
        }
    }
}

/// Gaps smaller than this are no-op prediction steps, not errors.
const MIN_STEP: f64 = 1e-12;

/// Drives one robot's belief timeline: buffers encoder samples, emits
/// prediction actions, and aligns measurements via extrapolation.
#[derive(Debug, Clone)]
pub struct Scheduler {
    queue: StampedQueue<ControlInput>,
    prev: Option<ControlInput>,
    curr: Option<ControlInput>,
    /// Stamp the belief has been advanced to.
    clock: f64,
    /// Measurement/control pairs closer than this are treated as
    /// simultaneous: no extrapolation micro-step is emitted.
    slop: f64,
    last_meas: f64,
    /// Inflate extrapolated-step process noise by the propagation factor
    /// `(1+a)^2 + a^2` of the two-sample extrapolation.
    inflate_extrapolated: bool,
    /// Measurements dropped for being out of order or unalignable.
    pub dropped_measurements: u32,
}

impl Scheduler {
    pub fn new(start: f64, slop: f64, inflate_extrapolated: bool) -> Self {
        Scheduler {
            queue: StampedQueue::default(),
            prev: None,
            curr: None,
            clock: start,
            slop,
            last_meas: f64::NEG_INFINITY,
            inflate_extrapolated,
            dropped_measurements: 0,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn push_control(&mut self, u: ControlInput) -> Result<()> {
        self.queue.push(u)
    }

    /// Drain buffered controls up to `t` as prediction actions, then close
    /// the remaining gap with one extrapolated step if the stream allows it.
    /// The belief clock may fall short of `t` during warm-up (fewer than two
    /// encoder samples seen).
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<Action>> {
        let mut actions = Vec::new();
        while self
            .queue
            .front_stamp()
            .is_some_and(|s| s <= t + MIN_STEP)
        {
            let u = self.queue.pop().expect("front checked");
            if u.stamp > self.clock + MIN_STEP {
                actions.push(Action::Predict {
                    control: u,
                    dt: u.stamp - self.clock,
                    q_scale: 1.0,
                });
                self.clock = u.stamp;
            }
            self.prev = self.curr;
            self.curr = Some(u);
        }
        if t > self.clock + self.slop.max(MIN_STEP) {
            if let (Some(prev), Some(curr)) = (self.prev, self.curr) {
                let u = extrapolate_control(&prev, &curr, t)?;
                let q_scale = if self.inflate_extrapolated {
                    let a = (t - curr.stamp) / (curr.stamp - prev.stamp);
                    (1.0 + a).powi(2) + a * a
                } else {
                    1.0
                };
                actions.push(Action::Predict {
                    control: u,
                    dt: t - self.clock,
                    q_scale,
                });
                self.clock = t;
            }
            // else: warm-up, the clock lags until two samples exist.
        }
        Ok(actions)
    }

    /// Schedule the handling of one measurement stamped `meas_stamp`:
    /// predictions for every buffered control up to it, an extrapolated
    /// prediction to the measurement stamp, then the update action. Returns
    /// `None` when the measurement is dropped (out of order, or the control
    /// stream cannot be aligned to it yet).
    pub fn schedule(&mut self, meas_stamp: f64) -> Result<Option<Vec<Action>>> {
        if meas_stamp <= self.last_meas {
            self.dropped_measurements += 1;
            return Ok(None);
        }
        self.last_meas = meas_stamp;
        let actions = self.advance_to(meas_stamp)?;
        if self.clock + self.slop < meas_stamp - MIN_STEP {
            self.dropped_measurements += 1;
            // Predictions already emitted remain valid belief advances even
            // though the measurement is dropped; callers must apply them.
            return Ok(None);
        }
        let mut actions = actions;
        actions.push(Action::Update { stamp: meas_stamp });
        Ok(Some(actions))
    }
}
