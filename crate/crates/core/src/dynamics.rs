//! Point-mass kinematics, rollouts and trajectory comparison.

use crate::error::{Error, Result};
use crate::types::{ControlSequence, Trajectory, TrajectoryPoint, TIME_EPS};

/// Advance one step. Speed is clamped at zero: vehicles do not reverse.
pub fn kinematic_step(p: &TrajectoryPoint, a: f64, psi: f64, tau: f64) -> Result<TrajectoryPoint> {
    if !(p.is_finite() && a.is_finite() && psi.is_finite()) {
        return Err(Error::InvalidState(format!(
            "non-finite input to kinematic step: {p:?}, a={a}, psi={psi}"
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Parameter(format!(
            "step must be positive, got {tau}"
        )));
    }
    Ok(step_unchecked(p, a, psi, tau))
}

#[inline]
pub(crate) fn step_unchecked(p: &TrajectoryPoint, a: f64, psi: f64, tau: f64) -> TrajectoryPoint {
    let (sin, cos) = psi.sin_cos();
    TrajectoryPoint {
        t: p.t + tau,
        x: p.x + p.v * tau * cos,
        y: p.y + p.v * tau * sin,
        v: (p.v + a * tau).max(0.0),
        a,
        psi,
    }
}

/// Apply `controls` in order starting from `initial`; returns `len + 1` points.
pub fn rollout(
    initial: &TrajectoryPoint,
    controls: &ControlSequence,
    tau: f64,
) -> Result<Trajectory> {
    initial.validate()?;
    let mut points = Vec::with_capacity(controls.len() + 1);
    points.push(*initial);
    for c in controls.controls() {
        let next = kinematic_step(points.last().unwrap(), c.a, c.psi, tau)?;
        points.push(next);
    }
    Ok(Trajectory::from_parts_unchecked(points, tau))
}

/// Mean pointwise planar distance between two equal-length trajectories.
pub fn euclidean_distance(t1: &Trajectory, t2: &Trajectory) -> Result<f64> {
    points_distance(t1.points(), t2.points())
}

pub(crate) fn points_distance(a: &[TrajectoryPoint], b: &[TrajectoryPoint]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "cannot compare trajectories of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.x - q.x).hypot(p.y - q.y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Resample onto a uniform grid of step `tau` starting at the first sample.
/// Positions, speed and heading are interpolated linearly; acceleration is
/// re-derived from the resampled speed by central differences.
pub fn resample_trajectory(traj: &Trajectory, tau: f64) -> Result<Trajectory> {
    resample_points(traj.points(), tau)
}

/// Like [`resample_trajectory`] but accepts irregularly spaced, strictly
/// increasing samples.
pub fn resample_points(points: &[TrajectoryPoint], tau: f64) -> Result<Trajectory> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Parameter(format!(
            "resampling step must be positive, got {tau}"
        )));
    }
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Shape("cannot resample an empty trajectory".into())),
    };
    if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
        return Err(Error::Shape(format!(
            "timestamps not increasing at index {}",
            i + 1
        )));
    }
    let span = last.t - first.t;
    if span + TIME_EPS < tau {
        return Err(Error::Coverage(format!(
            "trajectory spans {span} s, shorter than one step of {tau} s"
        )));
    }
    let n = ((span + TIME_EPS) / tau).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let t = first.t + k as f64 * tau;
        while seg + 2 < points.len() && points[seg + 1].t < t - TIME_EPS {
            seg += 1;
        }
        let p = &points[seg];
        let q = &points[(seg + 1).min(points.len() - 1)];
        let p = if (t - p.t).abs() <= TIME_EPS {
            TrajectoryPoint { t, ..*p }
        } else if (t - q.t).abs() <= TIME_EPS {
            TrajectoryPoint { t, ..*q }
        } else {
            let w = ((t - p.t) / (q.t - p.t)).clamp(0.0, 1.0);
            let lerp = |a: f64, b: f64| a + (b - a) * w;
            TrajectoryPoint {
                t,
                x: lerp(p.x, q.x),
                y: lerp(p.y, q.y),
                v: lerp(p.v, q.v),
                a: 0.0,
                psi: lerp(p.psi, q.psi),
            }
        };
        out.push(p);
    }
    let speeds: Vec<f64> = out.iter().map(|p| p.v).collect();
    for (i, p) in out.iter_mut().enumerate() {
        p.a = central_difference(&speeds, i, tau);
    }
    Trajectory::new(out, tau)
}

fn central_difference(values: &[f64], i: usize, h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        0.0
    } else if i == 0 {
        (values[1] - values[0]) / h
    } else if i == n - 1 {
        (values[n - 1] - values[n - 2]) / h
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * h)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::types::{Control, ControlBounds};

    fn p(x: f64, y: f64, v: f64, psi: f64) -> TrajectoryPoint {
        TrajectoryPoint::new(0.0, x, y, v, 0.0, psi)
    }

    #[test]
    fn step_examples() {
        let q = kinematic_step(&p(0.0, 0.0, 10.0, 0.0), 0.0, 0.0, 0.1).unwrap();
        assert!((q.x - 1.0).abs() < 1e-12 && q.y == 0.0 && q.v == 10.0);

        let q = kinematic_step(&p(0.0, 0.0, 10.0, FRAC_PI_2), 0.0, FRAC_PI_2, 0.1).unwrap();
        assert!(q.x.abs() < 1e-12 && (q.y - 1.0).abs() < 1e-12 && q.v == 10.0);

        let q = kinematic_step(&p(0.0, 0.0, 10.0, 0.0), 2.0, 0.0, 0.1).unwrap();
        assert!((q.v - 10.2).abs() < 1e-12);
        assert!((q.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_non_finite() {
        let err = kinematic_step(&p(f64::NAN, 0.0, 1.0, 0.0), 0.0, 0.0, 0.1);
        assert!(matches!(err, Err(Error::InvalidState(_))));
        assert!(kinematic_step(&p(0.0, 0.0, 1.0, 0.0), f64::INFINITY, 0.0, 0.1).is_err());
    }

    #[test]
    fn rollout_examples() {
        let b = ControlBounds::default();
        let init = p(0.0, 0.0, 10.0, 0.0);
        let tr = rollout(&init, &ControlSequence::zeros(3, b).unwrap(), 0.1).unwrap();
        let xs: Vec<f64> = tr.points().iter().map(|q| q.x).collect();
        for (x, want) in xs.iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert!((x - want).abs() < 1e-12);
        }

        let one = ControlSequence::new(vec![Control { a: 1.5, psi: 0.1 }], b).unwrap();
        let tr = rollout(&init, &one, 0.1).unwrap();
        assert_eq!(
            tr.points()[1],
            kinematic_step(&init, 1.5, 0.1, 0.1).unwrap()
        );

        let brake = ControlSequence::new(vec![Control { a: -4.0, psi: 0.0 }; 3], b).unwrap();
        let tr = rollout(&p(0.0, 0.0, 0.2, 0.0), &brake, 0.1).unwrap();
        let vs: Vec<f64> = tr.points().iter().map(|q| q.v).collect();
        assert_eq!(vs, vec![0.2, 0.0, 0.0, 0.0]);
    }

    fn line(offset: f64, n: usize) -> Trajectory {
        let pts = (0..n)
            .map(|i| TrajectoryPoint::new(i as f64 * 0.1, i as f64, offset, 10.0, 0.0, 0.0))
            .collect();
        Trajectory::new(pts, 0.1).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            euclidean_distance(&line(0.0, 5), &line(0.0, 5)).unwrap(),
            0.0
        );
        for n in [1, 2, 7] {
            let d = euclidean_distance(&line(0.0, n), &line(1.0, n)).unwrap();
            assert!((d - 1.0).abs() < 1e-12);
        }
        let a = Trajectory::new(
            vec![
                p(0.0, 0.0, 1.0, 0.0),
                TrajectoryPoint {
                    t: 0.1,
                    ..p(1.0, 0.0, 1.0, 0.0)
                },
            ],
            0.1,
        )
        .unwrap();
        let b = Trajectory::new(
            vec![
                p(0.0, 0.0, 1.0, 0.0),
                TrajectoryPoint {
                    t: 0.1,
                    ..p(1.0, 1.0, 1.0, 0.0)
                },
            ],
            0.1,
        )
        .unwrap();
        assert!((euclidean_distance(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            euclidean_distance(&line(0.0, 3), &line(0.0, 4)),
            Err(Error::Shape(_))
        ));
    }

    fn ramp(dt: f64, n: usize) -> Trajectory {
        // v = 5 + 2t, x = 5t + t^2
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                TrajectoryPoint::new(t, 5.0 * t + t * t, 0.0, 5.0 + 2.0 * t, 2.0, 0.0)
            })
            .collect();
        Trajectory::new(pts, dt).unwrap()
    }

    #[test]
    fn resample_own_step_is_identity() {
        let tr = ramp(0.1, 21);
        let rs = resample_trajectory(&tr, 0.1).unwrap();
        assert_eq!(rs.len(), tr.len());
        for (a, b) in rs.points().iter().zip(tr.points()) {
            for (u, w) in [
                (a.t, b.t),
                (a.x, b.x),
                (a.y, b.y),
                (a.v, b.v),
                (a.a, b.a),
                (a.psi, b.psi),
            ] {
                assert!((u - w).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn resample_constant_speed_and_midpoints() {
        let tr = line(0.0, 11);
        let rs = resample_trajectory(&tr, 0.25).unwrap();
        assert_eq!(rs.len(), 5);
        assert!(rs
            .points()
            .iter()
            .all(|q| (q.v - 10.0).abs() < 1e-12 && q.a.abs() < 1e-9));

        let tr = ramp(0.2, 6);
        let rs = resample_trajectory(&tr, 0.1).unwrap();
        let mid = rs.points()[1];
        let want = 0.5 * (tr.points()[0].v + tr.points()[1].v);
        assert!((mid.v - want).abs() < 1e-12);
    }

    #[test]
    fn resample_rejects_bad_step() {
        let tr = line(0.0, 3);
        assert!(matches!(
            resample_trajectory(&tr, 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            resample_trajectory(&tr, 1.0),
            Err(Error::Coverage(_))
        ));
    }
}
