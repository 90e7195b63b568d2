//! Trajectory features, their scaling, and driver-characteristic reweighting.
//!
//! Six raw features are defined; a pass maneuver uses the first five and a
//! stop maneuver the last five. Each is an average over trajectory points, so
//! every feature is nonnegative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EnvironmentState, Intention, Trajectory, TrajectoryPoint, TIME_EPS};

pub const FEATURE_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    SpeedLimit,
    Acceleration,
    Headway,
    Heading,
    LateralAccel,
    StopPosition,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::SpeedLimit,
        Feature::Acceleration,
        Feature::Headway,
        Feature::Heading,
        Feature::LateralAccel,
        Feature::StopPosition,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::SpeedLimit => "speed_limit",
            Feature::Acceleration => "acceleration",
            Feature::Headway => "headway",
            Feature::Heading => "heading",
            Feature::LateralAccel => "lateral_accel",
            Feature::StopPosition => "stop_position",
        }
    }
}

/// Feature order for a maneuver. Weight vectors and scalings index into this.
pub fn feature_order(maneuver: Intention) -> [Feature; FEATURE_COUNT] {
    match maneuver {
        Intention::Pass => [
            Feature::SpeedLimit,
            Feature::Acceleration,
            Feature::Headway,
            Feature::Heading,
            Feature::LateralAccel,
        ],
        Intention::Stop => [
            Feature::Acceleration,
            Feature::Headway,
            Feature::Heading,
            Feature::LateralAccel,
            Feature::StopPosition,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Below this speed the headway term switches from time to space headway.
    pub v_min: f64,
    /// Subtracted from the front-to-front gap to get a bumper gap.
    pub vehicle_length: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            v_min: 1.0,
            vehicle_length: 4.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub maneuver: Intention,
}

impl FeatureVector {
    pub fn scaled(&self, scaling: &FeatureScaling) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|k| self.values[k] * scaling.scale[k])
    }
}

/// Per-feature multipliers that bring the training set's mean features to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub scale: [f64; FEATURE_COUNT],
}

impl FeatureScaling {
    pub fn identity() -> Self {
        Self {
            scale: [1.0; FEATURE_COUNT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "scaling must be positive: {:?}",
                self.scale
            )))
        }
    }
}

pub fn fit_scaling(dataset: &[FeatureVector]) -> Result<FeatureScaling> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Parameter("cannot fit scaling on an empty dataset".into()))?;
    if dataset.iter().any(|f| f.maneuver != first.maneuver) {
        return Err(Error::Parameter("scaling dataset mixes maneuvers".into()));
    }
    let m = dataset.len() as f64;
    let scale = std::array::from_fn(|k| {
        let mean = dataset.iter().map(|f| f.values[k]).sum::<f64>() / m;
        if mean > 0.0 && (1.0 / mean).is_finite() {
            1.0 / mean
        } else {
            1.0
        }
    });
    Ok(FeatureScaling { scale })
}

/// Nonnegative weights over a maneuver's five features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub theta: [f64; FEATURE_COUNT],
    pub maneuver: Intention,
}

impl WeightVector {
    pub fn new(theta: [f64; FEATURE_COUNT], maneuver: Intention) -> Result<Self> {
        if theta.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter(format!(
                "weights must be finite and nonnegative: {theta:?}"
            )));
        }
        Ok(Self { theta, maneuver })
    }

    pub fn ones(maneuver: Intention) -> Self {
        Self {
            theta: [1.0; FEATURE_COUNT],
            maneuver,
        }
    }

    /// Unit weight on one feature of the maneuver.
    pub fn unit(maneuver: Intention, feature: Feature) -> Result<Self> {
        let k = feature_order(maneuver)
            .iter()
            .position(|f| *f == feature)
            .ok_or_else(|| {
                Error::Parameter(format!("{} not used by {maneuver}", feature.name()))
            })?;
        let mut theta = [0.0; FEATURE_COUNT];
        theta[k] = 1.0;
        Ok(Self { theta, maneuver })
    }

    pub fn scaled_by(&self, c: f64) -> Self {
        Self {
            theta: self.theta.map(|w| w * c),
            maneuver: self.maneuver,
        }
    }

    /// Weights on the six raw features: `theta_k * scale_k` in each used slot.
    pub(crate) fn raw_weights(&self, scaling: &FeatureScaling) -> [f64; 6] {
        let mut w = [0.0; 6];
        for (k, f) in feature_order(self.maneuver).iter().enumerate() {
            w[f.slot()] = self.theta[k] * scaling.scale[k];
        }
        w
    }
}

/// Reweight for a driver characteristic `lambda`. Efficiency weights (speed
/// limit, stop position) get `2 * lambda`, the acceleration weight gets
/// `2 * (1 - lambda)`, so `lambda = 0.5` leaves the weights untouched.
pub fn apply_lambda(theta: &WeightVector, lambda: f64) -> Result<WeightVector> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let mut out = *theta;
    for (k, f) in feature_order(theta.maneuver).iter().enumerate() {
        match f {
            Feature::SpeedLimit | Feature::StopPosition => out.theta[k] *= 2.0 * lambda,
            Feature::Acceleration => out.theta[k] *= 2.0 * (1.0 - lambda),
            _ => {}
        }
    }
    Ok(out)
}

pub fn compute_features(
    traj: &Trajectory,
    env: &EnvironmentState,
    maneuver: Intention,
) -> Result<FeatureVector> {
    compute_features_with(traj, env, maneuver, &FeatureParams::default())
}

pub fn compute_features_with(
    traj: &Trajectory,
    env: &EnvironmentState,
    maneuver: Intention,
    params: &FeatureParams,
) -> Result<FeatureVector> {
    let scene = SceneGrid::new(env, traj.start_time(), traj.dt(), traj.len(), *params);
    let raw = scene.raw_features(traj.points())?;
    let values = feature_order(maneuver).map(|f| raw[f.slot()]);
    Ok(FeatureVector { values, maneuver })
}

/// Scene quantities resolved on a fixed time grid so that repeated feature
/// evaluations over candidate trajectories skip interpolation.
#[derive(Debug, Clone)]
pub(crate) struct SceneGrid {
    fv_x: Option<Vec<f64>>,
    v_lim: f64,
    x_queue: f64,
    /// Number of leading points that count toward the stop-position feature.
    queue_points: usize,
    params: FeatureParams,
}

/// Partial derivatives of a scalar cost with respect to one point's state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PointPartials {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub psi: f64,
}

impl SceneGrid {
    pub fn new(
        env: &EnvironmentState,
        t0: f64,
        dt: f64,
        len: usize,
        params: FeatureParams,
    ) -> Self {
        let fv_x = env.fv_trajectory.as_ref().map(|fv| {
            (0..len)
                .map(|j| fv.state_at(t0 + j as f64 * dt).x)
                .collect()
        });
        let since_start = env.launch_time() - t0;
        let queue_points = if since_start < -TIME_EPS {
            0
        } else {
            (((since_start + TIME_EPS) / dt).floor() as usize + 1).min(len)
        };
        Self {
            fv_x,
            v_lim: env.v_lim,
            x_queue: env.x_queue,
            queue_points,
            params,
        }
    }

    pub fn len(&self) -> Option<usize> {
        self.fv_x.as_ref().map(Vec::len)
    }

    fn gap(&self, j: usize, x: f64) -> Option<f64> {
        self.fv_x
            .as_ref()
            .map(|fv| fv[j] - x - self.params.vehicle_length)
    }

    /// Bumper gap at the first point, or `None` on a free road.
    pub fn initial_gap(&self, p: &TrajectoryPoint) -> Option<f64> {
        self.gap(0, p.x)
    }

    pub fn raw_features(&self, points: &[TrajectoryPoint]) -> Result<[f64; 6]> {
        if let Some(len) = self.len() {
            if len < points.len() {
                return Err(Error::Shape(format!(
                    "scene grid covers {len} points, trajectory has {}",
                    points.len()
                )));
            }
        }
        let n = points.len() as f64;
        let mut f = [0.0; 6];
        for (j, p) in points.iter().enumerate() {
            f[0] += (p.v - self.v_lim).powi(2);
            f[1] += p.a * p.a;
            if let Some(d) = self.gap(j, p.x) {
                if d <= 0.0 {
                    return Err(Error::InfeasibleScene(format!(
                        "front vehicle overlap (gap {d:.3} m) at t={}",
                        p.t
                    )));
                }
                let h = if p.v > self.params.v_min { d / p.v } else { d };
                if h == 0.0 {
                    return Err(Error::DivisionGuard(format!("zero headway at t={}", p.t)));
                }
                f[2] += 1.0 / (h * h);
            }
            f[3] += p.psi * p.psi;
            f[4] += (p.a * p.psi.sin()).powi(2);
        }
        for v in &mut f[..5] {
            *v /= n;
        }
        if self.queue_points > 0 {
            let k = self.queue_points.min(points.len());
            f[5] = points[..k]
                .iter()
                .map(|p| (p.x - self.x_queue).powi(2))
                .sum::<f64>()
                / k as f64;
        }
        Ok(f)
    }

    /// `sum_k w_k f_k`, or infinity when the trajectory overlaps the front vehicle.
    pub fn weighted_cost(&self, points: &[TrajectoryPoint], w: &[f64; 6]) -> f64 {
        let n = points.len() as f64;
        let mut acc = 0.0;
        for (j, p) in points.iter().enumerate() {
            let mut c = w[0] * (p.v - self.v_lim).powi(2) + w[1] * p.a * p.a;
            if let Some(d) = self.gap(j, p.x) {
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                let inv = if p.v > self.params.v_min {
                    p.v / d
                } else {
                    1.0 / d
                };
                c += w[2] * inv * inv;
            }
            c += w[3] * p.psi * p.psi + w[4] * (p.a * p.psi.sin()).powi(2);
            acc += c;
        }
        acc /= n;
        if w[5] != 0.0 && self.queue_points > 0 {
            let k = self.queue_points.min(points.len());
            acc += w[5]
                * points[..k]
                    .iter()
                    .map(|p| (p.x - self.x_queue).powi(2))
                    .sum::<f64>()
                / k as f64;
        }
        acc
    }

    /// Partials of [`weighted_cost`](Self::weighted_cost) with respect to each
    /// point's state, written into `out`. Assumes a feasible trajectory.
    pub fn cost_partials(
        &self,
        points: &[TrajectoryPoint],
        w: &[f64; 6],
        out: &mut [PointPartials],
    ) {
        let n = points.len() as f64;
        let k = self.queue_points.min(points.len());
        for (j, (p, g)) in points.iter().zip(out.iter_mut()).enumerate() {
            let mut d_x = 0.0;
            let mut d_v = 2.0 * w[0] * (p.v - self.v_lim);
            let (sin, cos) = p.psi.sin_cos();
            let mut d_a = 2.0 * w[1] * p.a + 2.0 * w[4] * p.a * sin * sin;
            let d_psi = 2.0 * w[3] * p.psi + 2.0 * w[4] * p.a * p.a * sin * cos;
            if let Some(d) = self.gap(j, p.x) {
                if p.v > self.params.v_min {
                    d_x += w[2] * 2.0 * p.v * p.v / (d * d * d);
                    d_v += w[2] * 2.0 * p.v / (d * d);
                } else {
                    d_x += w[2] * 2.0 / (d * d * d);
                }
            }
            d_a /= n;
            d_v /= n;
            d_x /= n;
            if j < k {
                d_x += w[5] * 2.0 * (p.x - self.x_queue) / k as f64;
            }
            *g = PointPartials {
                x: d_x,
                y: 0.0,
                v: d_v,
                a: d_a,
                psi: d_psi / n,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TrajectoryPoint;

    fn env(fv: Option<Trajectory>) -> EnvironmentState {
        EnvironmentState {
            yellow_onset: 0.0,
            yellow_duration: 3.5,
            stop_bar_x: 200.0,
            v_lim: 10.0,
            fv_trajectory: fv,
            x_queue: 150.0,
            i_launch: 1000,
            a_max_naive: 2.0,
        }
    }

    fn traj(points: &[(f64, f64, f64, f64)]) -> Trajectory {
        let pts = points
            .iter()
            .enumerate()
            .map(|(i, &(x, v, a, psi))| TrajectoryPoint::new(i as f64 * 0.1, x, 0.0, v, a, psi))
            .collect();
        Trajectory::new(pts, 0.1).unwrap()
    }

    #[test]
    fn zero_cases_at_speed_limit() {
        let tr = traj(&[
            (0.0, 10.0, 0.0, 0.0),
            (1.0, 10.0, 0.0, 0.0),
            (2.0, 10.0, 0.0, 0.0),
        ]);
        let f = compute_features(&tr, &env(None), Intention::Pass).unwrap();
        assert_eq!(f.values, [0.0; 5]);
    }

    #[test]
    fn speed_limit_arithmetic() {
        let mut e = env(None);
        e.v_lim = 11.0;
        let tr = traj(&[(0.0, 10.0, 0.0, 0.0), (1.0, 12.0, 0.0, 0.0)]);
        let f = compute_features(&tr, &e, Intention::Pass).unwrap();
        assert!((f.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn headway_time_and_space_branches() {
        // Front vehicle 24.5 m ahead (front to front): 20 m bumper gap.
        let fv = traj(&[
            (24.5, 10.0, 0.0, 0.0),
            (25.5, 10.0, 0.0, 0.0),
            (26.5, 10.0, 0.0, 0.0),
        ]);
        let tr = traj(&[
            (0.0, 10.0, 0.0, 0.0),
            (1.0, 10.0, 0.0, 0.0),
            (2.0, 10.0, 0.0, 0.0),
        ]);
        let f = compute_features(&tr, &env(Some(fv.clone())), Intention::Pass).unwrap();
        assert!((f.values[2] - 0.25).abs() < 1e-12);

        // At v <= v_min the space headway is used: 1 / 20^2.
        let slow = traj(&[
            (0.0, 1.0, 0.0, 0.0),
            (1.0, 1.0, 0.0, 0.0),
            (2.0, 1.0, 0.0, 0.0),
        ]);
        let f = compute_features(&slow, &env(Some(fv)), Intention::Pass).unwrap();
        assert!((f.values[2] - 1.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_infeasible() {
        let fv = traj(&[(4.0, 10.0, 0.0, 0.0), (5.0, 10.0, 0.0, 0.0)]);
        let tr = traj(&[(0.0, 10.0, 0.0, 0.0), (1.0, 10.0, 0.0, 0.0)]);
        let err = compute_features(&tr, &env(Some(fv)), Intention::Pass);
        assert!(matches!(err, Err(Error::InfeasibleScene(_))));
    }

    #[test]
    fn stop_position_only_before_launch() {
        let mut e = env(None);
        e.x_queue = 5.0;
        e.i_launch = 2;
        let tr = traj(&[
            (5.0, 0.0, 0.0, 0.0),
            (5.0, 0.0, 0.0, 0.0),
            (5.0, 0.0, 0.0, 0.0),
            (9.0, 0.0, 0.0, 0.0),
        ]);
        let f = compute_features(&tr, &e, Intention::Stop).unwrap();
        assert_eq!(f.values[4], 0.0);

        e.i_launch = 3;
        let f = compute_features(&tr, &e, Intention::Stop).unwrap();
        assert!((f.values[4] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn heading_and_lateral_accel() {
        let tr = traj(&[(0.0, 10.0, 2.0, 0.1), (1.0, 10.0, 2.0, -0.1)]);
        let f = compute_features(&tr, &env(None), Intention::Pass).unwrap();
        assert!((f.values[1] - 4.0).abs() < 1e-12);
        assert!((f.values[3] - 0.01).abs() < 1e-12);
        assert!((f.values[4] - 4.0 * 0.1f64.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn scaling_examples() {
        let fv = |v: [f64; 5]| FeatureVector {
            values: v,
            maneuver: Intention::Pass,
        };
        let s =
            fit_scaling(&[fv([2.0, 0.0, 1.0, 3.0, 1.0]), fv([6.0, 0.0, 3.0, 5.0, 2.0])]).unwrap();
        assert_eq!(s.scale[0], 0.25);
        assert_eq!(s.scale[1], 1.0);
        let data = [fv([2.0, 0.0, 1.0, 3.0, 1.0]), fv([6.0, 0.0, 3.0, 5.0, 2.0])];
        let means: Vec<f64> = (0..5)
            .map(|k| data.iter().map(|d| d.scaled(&s)[k]).sum::<f64>() / 2.0)
            .collect();
        for (k, m) in means.iter().enumerate() {
            let want = if k == 1 { 0.0 } else { 1.0 };
            assert!((m - want).abs() < 1e-12);
        }
        assert!(fit_scaling(&[]).is_err());
    }

    #[test]
    fn lambda_reweighting() {
        let th = WeightVector::new([1.0, 2.0, 3.0, 4.0, 5.0], Intention::Pass).unwrap();
        assert_eq!(apply_lambda(&th, 0.5).unwrap(), th);
        let one = apply_lambda(&th, 1.0).unwrap();
        assert_eq!(one.theta, [2.0, 0.0, 3.0, 4.0, 5.0]);
        let zero = apply_lambda(&th, 0.0).unwrap();
        assert_eq!(zero.theta, [0.0, 4.0, 3.0, 4.0, 5.0]);

        let st = WeightVector::new([1.0, 2.0, 3.0, 4.0, 5.0], Intention::Stop).unwrap();
        assert_eq!(
            apply_lambda(&st, 1.0).unwrap().theta,
            [0.0, 2.0, 3.0, 4.0, 10.0]
        );
        assert!(apply_lambda(&th, 1.2).is_err());
        assert!(apply_lambda(&th, -0.1).is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let fv = traj(&[
            (30.0, 8.0, 0.0, 0.0),
            (30.8, 8.0, 0.0, 0.0),
            (31.6, 8.0, 0.0, 0.0),
        ]);
        let mut e = env(Some(fv));
        e.x_queue = 20.0;
        let pts = vec![
            TrajectoryPoint::new(0.0, 1.0, 0.2, 9.0, 0.5, 0.05),
            TrajectoryPoint::new(0.1, 1.9, 0.25, 0.5, -1.0, -0.1),
            TrajectoryPoint::new(0.2, 2.0, 0.25, 3.0, 2.0, 0.15),
        ];
        let grid = SceneGrid::new(&e, 0.0, 0.1, 3, FeatureParams::default());
        let w = [0.7, 1.3, 2.0, 0.4, 0.9, 0.05];
        let mut g = vec![PointPartials::default(); 3];
        grid.cost_partials(&pts, &w, &mut g);
        let h = 1e-6;
        for j in 0..3 {
            let fd = |f: &dyn Fn(&mut TrajectoryPoint, f64)| {
                let mut up = pts.clone();
                let mut dn = pts.clone();
                f(&mut up[j], h);
                f(&mut dn[j], -h);
                (grid.weighted_cost(&up, &w) - grid.weighted_cost(&dn, &w)) / (2.0 * h)
            };
            assert!((fd(&|p, d| p.x += d) - g[j].x).abs() < 1e-6);
            assert!((fd(&|p, d| p.v += d) - g[j].v).abs() < 1e-6);
            assert!((fd(&|p, d| p.a += d) - g[j].a).abs() < 1e-6);
            assert!((fd(&|p, d| p.psi += d) - g[j].psi).abs() < 1e-6);
        }
    }
}
