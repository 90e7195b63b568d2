//! Domain types shared by every stage of the predictor.
//!
//! Coordinates follow the road: `x` is longitudinal and grows toward (and
//! through) the stop bar, `y` is lateral. `psi` is the heading relative to the
//! road direction. All quantities are SI.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling step of the recorded data and default optimizer step, in seconds.
pub const DEFAULT_TAU: f64 = 0.1;

/// Tolerance on timestamp spacing.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub psi: f64,
}

impl TrajectoryPoint {
    pub fn new(t: f64, x: f64, y: f64, v: f64, a: f64, psi: f64) -> Self {
        Self { t, x, y, v, a, psi }
    }

    /// A point moving along the road axis.
    pub fn longitudinal(t: f64, x: f64, v: f64, a: f64) -> Self {
        Self::new(t, x, 0.0, v, a, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.y, self.v, self.a, self.psi]
            .iter()
            .all(|f| f.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState(format!("non-finite field in {self:?}")));
        }
        if self.v < 0.0 {
            return Err(Error::InvalidState(format!(
                "negative speed {} at t={}",
                self.v, self.t
            )));
        }
        if self.psi.abs() > FRAC_PI_2 {
            return Err(Error::InvalidState(format!(
                "heading {} exceeds pi/2 at t={}",
                self.psi, self.t
            )));
        }
        Ok(())
    }
}

/// Uniformly sampled sequence of trajectory points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
    dt: f64,
}

#[derive(Deserialize)]
struct RawTrajectory {
    points: Vec<TrajectoryPoint>,
    dt: f64,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = Error;

    fn try_from(raw: RawTrajectory) -> Result<Self> {
        Trajectory::new(raw.points, raw.dt)
    }
}

impl Trajectory {
    pub fn new(points: Vec<TrajectoryPoint>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Parameter(format!(
                "trajectory step must be positive, got {dt}"
            )));
        }
        if points.is_empty() {
            return Err(Error::Shape(
                "trajectory must contain at least one point".into(),
            ));
        }
        for p in &points {
            p.validate()?;
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if (step - dt).abs() > TIME_EPS {
                return Err(Error::Shape(format!(
                    "timestamps {} -> {} (index {}) are not spaced by {dt}",
                    w[0].t,
                    w[1].t,
                    i + 1
                )));
            }
        }
        Ok(Self { points, dt })
    }

    pub(crate) fn from_parts_unchecked(points: Vec<TrajectoryPoint>, dt: f64) -> Self {
        debug_assert!(!points.is_empty());
        Self { points, dt }
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TrajectoryPoint> {
        self.points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint {
        &self.points[self.points.len() - 1]
    }

    pub fn start_time(&self) -> f64 {
        self.first().t
    }

    pub fn end_time(&self) -> f64 {
        self.last().t
    }

    /// Index of the sample at time `t`, if one exists within `TIME_EPS`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time()) / self.dt).round();
        if k < 0.0 || k >= self.points.len() as f64 {
            return None;
        }
        let k = k as usize;
        ((self.points[k].t - t).abs() <= TIME_EPS).then_some(k)
    }

    /// Index of the first sample with `t_i >= t` (within `TIME_EPS`).
    pub fn first_index_at_or_after(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time()) / self.dt - TIME_EPS / self.dt)
            .ceil()
            .max(0.0) as usize;
        (k < self.points.len()).then_some(k)
    }

    /// Linearly interpolated state at time `t`. Outside the sampled span the
    /// state is extrapolated at constant speed and heading.
    pub fn state_at(&self, t: f64) -> TrajectoryPoint {
        let first = self.first();
        let last = self.last();
        if t <= first.t {
            return extrapolate(first, t);
        }
        if t >= last.t {
            return extrapolate(last, t);
        }
        let s = (t - first.t) / self.dt;
        let i = (s.floor() as usize).min(self.points.len() - 2);
        let w = s - i as f64;
        let p = &self.points[i];
        let q = &self.points[i + 1];
        let lerp = |a: f64, b: f64| a + (b - a) * w;
        TrajectoryPoint {
            t,
            x: lerp(p.x, q.x),
            y: lerp(p.y, q.y),
            v: lerp(p.v, q.v),
            a: lerp(p.a, q.a),
            psi: lerp(p.psi, q.psi),
        }
    }

    /// Sub-trajectory of points `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Trajectory> {
        if start >= end || end > self.points.len() {
            return Err(Error::Shape(format!(
                "slice {start}..{end} out of range for trajectory of length {}",
                self.points.len()
            )));
        }
        Ok(Self::from_parts_unchecked(
            self.points[start..end].to_vec(),
            self.dt,
        ))
    }

    /// Control inputs that produced points `1..`, in order.
    pub fn controls(&self) -> Vec<Control> {
        self.points[1..]
            .iter()
            .map(|p| Control { a: p.a, psi: p.psi })
            .collect()
    }
}

fn extrapolate(p: &TrajectoryPoint, t: f64) -> TrajectoryPoint {
    let dt = t - p.t;
    TrajectoryPoint {
        t,
        x: p.x + p.v * dt * p.psi.cos(),
        y: p.y + p.v * dt * p.psi.sin(),
        v: p.v,
        a: 0.0,
        psi: p.psi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub a: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub psi_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            a_min: -4.0,
            a_max: 3.0,
            psi_max: 0.2,
        }
    }
}

impl ControlBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a_min.is_finite()
            && self.a_max.is_finite()
            && self.a_min <= 0.0
            && self.a_max >= 0.0
            && self.a_min < self.a_max
            && self.psi_max >= 0.0
            && self.psi_max <= FRAC_PI_2;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid control bounds {self:?}")))
        }
    }

    pub fn contains(&self, c: &Control) -> bool {
        c.a >= self.a_min && c.a <= self.a_max && c.psi.abs() <= self.psi_max
    }

    pub fn project(&self, c: Control) -> Control {
        Control {
            a: c.a.clamp(self.a_min, self.a_max),
            psi: c.psi.clamp(-self.psi_max, self.psi_max),
        }
    }
}

/// Decision variables of the trajectory optimizer: one control per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    controls: Vec<Control>,
    bounds: ControlBounds,
}

impl ControlSequence {
    pub fn new(controls: Vec<Control>, bounds: ControlBounds) -> Result<Self> {
        bounds.validate()?;
        if controls.is_empty() {
            return Err(Error::Shape("control sequence must be non-empty".into()));
        }
        if let Some((i, c)) = controls
            .iter()
            .enumerate()
            .find(|(_, c)| !bounds.contains(c))
        {
            return Err(Error::Parameter(format!(
                "control {i} {c:?} outside bounds {bounds:?}"
            )));
        }
        Ok(Self { controls, bounds })
    }

    /// Replay of controls already known to be admissible (e.g. recorded
    /// ones); only headings are limited, to the physical range.
    pub(crate) fn from_raw(controls: Vec<Control>) -> Self {
        let bounds = ControlBounds {
            a_min: f64::MIN,
            a_max: f64::MAX,
            psi_max: FRAC_PI_2,
        };
        Self { controls, bounds }
    }

    pub fn zeros(horizon: usize, bounds: ControlBounds) -> Result<Self> {
        Self::new(vec![Control::default(); horizon], bounds)
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn bounds(&self) -> &ControlBounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intention {
    Pass,
    Stop,
}

impl Intention {
    pub fn other(self) -> Self {
        match self {
            Intention::Pass => Intention::Stop,
            Intention::Stop => Intention::Pass,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Intention::Pass => 0,
            Intention::Stop => 1,
        }
    }
}

impl fmt::Display for Intention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intention::Pass => "pass",
            Intention::Stop => "stop",
        })
    }
}

/// Everything about the scene that is not the target vehicle itself: signal
/// timing, road geometry, the front vehicle and the queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    /// Absolute time of the yellow onset.
    pub yellow_onset: f64,
    pub yellow_duration: f64,
    pub stop_bar_x: f64,
    pub v_lim: f64,
    /// Front vehicle; `None` on a free road.
    pub fv_trajectory: Option<Trajectory>,
    /// Where the queue ends, i.e. where a stopping vehicle comes to rest.
    pub x_queue: f64,
    /// Step on the 0.1 s sampling clock (counted from t = 0) at which the
    /// queue launches.
    pub i_launch: usize,
    pub a_max_naive: f64,
}

impl EnvironmentState {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.yellow_onset,
            self.yellow_duration,
            self.stop_bar_x,
            self.v_lim,
            self.x_queue,
            self.a_max_naive,
        ]
        .iter()
        .all(|f| f.is_finite());
        if !finite {
            return Err(Error::Parameter("non-finite environment field".into()));
        }
        if self.yellow_duration <= 0.0 {
            return Err(Error::Parameter(format!(
                "yellow_duration must be positive, got {}",
                self.yellow_duration
            )));
        }
        if self.v_lim <= 0.0 {
            return Err(Error::Parameter(format!(
                "v_lim must be positive, got {}",
                self.v_lim
            )));
        }
        if self.x_queue > self.stop_bar_x {
            return Err(Error::Parameter(format!(
                "x_queue {} lies beyond the stop bar {}",
                self.x_queue, self.stop_bar_x
            )));
        }
        if self.a_max_naive < 0.0 {
            return Err(Error::Parameter("a_max_naive must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn yellow_end(&self) -> f64 {
        self.yellow_onset + self.yellow_duration
    }

    pub fn in_yellow(&self, t: f64) -> bool {
        t >= self.yellow_onset - TIME_EPS && t < self.yellow_end() - TIME_EPS
    }

    pub fn launch_time(&self) -> f64 {
        self.i_launch as f64 * DEFAULT_TAU
    }

    /// Front-vehicle state at time `t`, if there is a front vehicle.
    pub fn fv_state_at(&self, t: f64) -> Option<TrajectoryPoint> {
        self.fv_trajectory.as_ref().map(|fv| fv.state_at(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, dt: f64, v: f64) -> Trajectory {
        let pts = (0..n)
            .map(|i| TrajectoryPoint::longitudinal(i as f64 * dt, i as f64 * dt * v, v, 0.0))
            .collect();
        Trajectory::new(pts, dt).unwrap()
    }

    #[test]
    fn rejects_irregular_timestamps() {
        let mut pts = straight(4, 0.1, 5.0).into_points();
        pts[2].t += 0.01;
        assert!(matches!(Trajectory::new(pts, 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_empty_and_negative_speed() {
        assert!(Trajectory::new(vec![], 0.1).is_err());
        let p = TrajectoryPoint::longitudinal(0.0, 0.0, -1.0, 0.0);
        assert!(matches!(p.validate(), Err(Error::InvalidState(_))));
    }

    #[test]
    fn state_at_interpolates_and_extrapolates() {
        let tr = straight(11, 0.1, 10.0);
        let mid = tr.state_at(0.25);
        assert!((mid.x - 2.5).abs() < 1e-12);
        let after = tr.state_at(1.5);
        assert!((after.x - 15.0).abs() < 1e-9);
        assert_eq!(tr.index_at(0.3), Some(3));
        assert_eq!(tr.index_at(0.35), None);
        assert_eq!(tr.first_index_at_or_after(0.35), Some(4));
        assert_eq!(tr.first_index_at_or_after(0.3), Some(3));
    }

    #[test]
    fn control_sequence_checks_bounds() {
        let b = ControlBounds::default();
        assert!(ControlSequence::new(vec![Control { a: 3.5, psi: 0.0 }], b).is_err());
        assert!(ControlSequence::new(vec![], b).is_err());
        assert_eq!(
            b.project(Control { a: -9.0, psi: 1.0 }),
            Control { a: -4.0, psi: 0.2 }
        );
    }

    #[test]
    fn environment_invariants() {
        let env = EnvironmentState {
            yellow_onset: 2.0,
            yellow_duration: 3.5,
            stop_bar_x: 100.0,
            v_lim: 15.0,
            fv_trajectory: None,
            x_queue: 101.0,
            i_launch: 400,
            a_max_naive: 2.0,
        };
        assert!(env.validate().is_err());
        let env = EnvironmentState {
            x_queue: 99.0,
            ..env
        };
        env.validate().unwrap();
        assert!(env.in_yellow(2.0));
        assert!(!env.in_yellow(5.5));
        assert!((env.launch_time() - 40.0).abs() < 1e-12);
    }
}
