//! Trajectory optimization: minimize the weighted feature cost over a control
//! sequence, with the vehicle kinematics applied by rollout.
//!
//! The decision variables are the per-step controls `(a, psi)`, so the only
//! constraints left are box bounds. They are handled by a spectral projected
//! gradient method: Barzilai-Borwein trial steps, projection onto the box, and
//! a monotone backtracking (halving) line search.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rollout, step_unchecked};
use crate::error::{Error, Result};
use crate::features::{FeatureParams, FeatureScaling, PointPartials, SceneGrid, WeightVector};
use crate::types::{
    Control, ControlBounds, ControlSequence, EnvironmentState, Trajectory, TrajectoryPoint,
    DEFAULT_TAU,
};

const MAX_HALVINGS: usize = 20;
const ARMIJO: f64 = 1e-4;
const COMFORT_BRAKE: f64 = 2.5;
const FOLLOW_TIME_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Reverse pass through the rollout.
    Adjoint,
    /// Central differences with step `grad_step`.
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub horizon: usize,
    pub tau: f64,
    pub max_iters: usize,
    pub grad_step: f64,
    /// Stop when one accepted step lowers the objective by less than this
    /// fraction of its value.
    pub tol: f64,
    pub restarts: usize,
    pub bounds: ControlBounds,
    pub gradient: GradientMode,
    pub features: FeatureParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            tau: DEFAULT_TAU,
            max_iters: 200,
            grad_step: 1e-4,
            tol: 1e-6,
            restarts: 3,
            bounds: ControlBounds::default(),
            gradient: GradientMode::Adjoint,
            features: FeatureParams::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.horizon == 0 {
            return Err(Error::Parameter("horizon must be at least one step".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Parameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Parameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.grad_step.is_finite() && self.grad_step > 0.0) {
            return Err(Error::Parameter("grad_step must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Parameter("at least one restart is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub trajectory: Trajectory,
    pub controls: ControlSequence,
    pub objective: f64,
    /// Whether the winning restart met the stopping rule before `max_iters`.
    pub converged: bool,
    pub restart: usize,
    /// Accepted objective values per restart; empty for infeasible starts.
    pub histories: Vec<Vec<f64>>,
}

/// `theta . (scaled features)` of a trajectory.
pub fn objective(
    traj: &Trajectory,
    theta: &WeightVector,
    env: &EnvironmentState,
    scaling: &FeatureScaling,
) -> Result<f64> {
    objective_with(traj, theta, env, scaling, &FeatureParams::default())
}

pub fn objective_with(
    traj: &Trajectory,
    theta: &WeightVector,
    env: &EnvironmentState,
    scaling: &FeatureScaling,
    params: &FeatureParams,
) -> Result<f64> {
    let scene = SceneGrid::new(env, traj.start_time(), traj.dt(), traj.len(), *params);
    let cost = scene.weighted_cost(traj.points(), &theta.raw_weights(scaling));
    if cost.is_finite() {
        Ok(cost)
    } else {
        scene.raw_features(traj.points())?;
        Err(Error::InfeasibleScene("objective is not finite".into()))
    }
}

/// Best trajectory found over the configured restarts.
pub fn optimize_trajectory(
    theta: &WeightVector,
    env: &EnvironmentState,
    init: &TrajectoryPoint,
    scaling: &FeatureScaling,
    cfg: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    cfg.validate()?;
    scaling.validate()?;
    init.validate()?;
    let problem = Problem::new(theta, env, init, scaling, cfg);
    if let Some(gap) = problem.scene.initial_gap(init) {
        if gap <= 0.0 {
            return Err(Error::InfeasibleScene(format!(
                "target overlaps the front vehicle at t={} (gap {gap:.3} m)",
                init.t
            )));
        }
    }

    let mut best: Option<(f64, usize, Vec<f64>, bool)> = None;
    let mut histories = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let start = problem.start(r);
        match problem.descend(start) {
            Some(run) => {
                let better = match &best {
                    // Lexicographic on (objective, restart index).
                    Some((obj, idx, _, _)) => (run.objective, r) < (*obj, *idx),
                    None => true,
                };
                if better {
                    best = Some((run.objective, r, run.u, run.converged));
                }
                histories.push(run.history);
            }
            None => histories.push(Vec::new()),
        }
    }
    let (objective, restart, u, converged) = best
        .ok_or_else(|| Error::InfeasibleScene("every restart overlaps the front vehicle".into()))?;
    let controls = ControlSequence::new(problem.to_controls(&u), cfg.bounds)?;
    let trajectory = rollout(init, &controls, cfg.tau)?;
    Ok(OptimizationOutcome {
        trajectory,
        controls,
        objective,
        converged,
        restart,
        histories,
    })
}

struct Run {
    u: Vec<f64>,
    objective: f64,
    converged: bool,
    history: Vec<f64>,
}

struct Problem {
    init: TrajectoryPoint,
    tau: f64,
    horizon: usize,
    bounds: ControlBounds,
    scene: SceneGrid,
    weights: [f64; 6],
    cfg: OptimizerConfig,
    v_ref: Vec<f64>,
}

impl Problem {
    fn new(
        theta: &WeightVector,
        env: &EnvironmentState,
        init: &TrajectoryPoint,
        scaling: &FeatureScaling,
        cfg: &OptimizerConfig,
    ) -> Self {
        let n = cfg.horizon + 1;
        let v_ref = (1..n)
            .map(|k| {
                env.fv_state_at(init.t + k as f64 * cfg.tau)
                    .map(|p| p.v)
                    .unwrap_or(env.v_lim)
            })
            .collect();
        Self {
            init: *init,
            tau: cfg.tau,
            horizon: cfg.horizon,
            bounds: cfg.bounds,
            scene: SceneGrid::new(env, init.t, cfg.tau, n, cfg.features),
            weights: theta.raw_weights(scaling),
            cfg: *cfg,
            v_ref,
        }
    }

    fn to_controls(&self, u: &[f64]) -> Vec<Control> {
        u.chunks_exact(2)
            .map(|c| Control { a: c[0], psi: c[1] })
            .collect()
    }

    fn project(&self, u: &mut [f64]) {
        for c in u.chunks_exact_mut(2) {
            c[0] = c[0].clamp(self.bounds.a_min, self.bounds.a_max);
            c[1] = c[1].clamp(-self.bounds.psi_max, self.bounds.psi_max);
        }
    }

    /// Deterministic starting controls for restart `r`.
    fn start(&self, r: usize) -> Vec<f64> {
        let mut u = vec![0.0; 2 * self.horizon];
        let mut v = self.init.v;
        match r {
            0 => {}
            1 => {
                for k in 0..self.horizon {
                    let a = -(COMFORT_BRAKE.min(v / self.tau));
                    u[2 * k] = a;
                    v = (v + a * self.tau).max(0.0);
                }
            }
            2 => {
                for k in 0..self.horizon {
                    let a = ((self.v_ref[k] - v) / FOLLOW_TIME_CONSTANT)
                        .clamp(self.bounds.a_min, self.bounds.a_max);
                    u[2 * k] = a;
                    v = (v + a * self.tau).max(0.0);
                }
            }
            _ => {
                let extra = (self.cfg.restarts - 3) as f64;
                let frac = ((r - 3) as f64 + 0.5) / extra;
                let a = self.bounds.a_min + (self.bounds.a_max - self.bounds.a_min) * frac;
                for k in 0..self.horizon {
                    u[2 * k] = a;
                }
            }
        }
        self.project(&mut u);
        u
    }

    fn rollout_into(&self, u: &[f64], pts: &mut Vec<TrajectoryPoint>) {
        pts.clear();
        pts.push(self.init);
        let mut p = self.init;
        for c in u.chunks_exact(2) {
            p = step_unchecked(&p, c[0], c[1], self.tau);
            pts.push(p);
        }
    }

    fn cost(&self, u: &[f64], pts: &mut Vec<TrajectoryPoint>) -> f64 {
        self.rollout_into(u, pts);
        self.scene.weighted_cost(pts, &self.weights)
    }

    fn gradient(&self, u: &[f64], pts: &mut Vec<TrajectoryPoint>, grad: &mut [f64]) {
        match self.cfg.gradient {
            GradientMode::Adjoint => self.adjoint_gradient(u, pts, grad),
            GradientMode::CentralDifference => self.fd_gradient(u, pts, grad),
        }
    }

    fn adjoint_gradient(&self, u: &[f64], pts: &mut Vec<TrajectoryPoint>, grad: &mut [f64]) {
        self.rollout_into(u, pts);
        let n = pts.len();
        let mut partials = vec![PointPartials::default(); n];
        self.scene.cost_partials(pts, &self.weights, &mut partials);
        let tau = self.tau;
        // Total derivatives of the cost with respect to the state of point j+1.
        let (mut lx, mut ly, mut lv) = (0.0, 0.0, 0.0);
        for j in (1..n).rev() {
            let p = &partials[j];
            let cur = &pts[j];
            let prev = &pts[j - 1];
            let mut lvj = p.v;
            if j + 1 < n {
                let next = &pts[j + 1];
                let (sin, cos) = next.psi.sin_cos();
                let active = cur.v + next.a * tau > 0.0;
                lvj += lx * tau * cos + ly * tau * sin + if active { lv } else { 0.0 };
            }
            let lxj = p.x + lx;
            let lyj = p.y + ly;
            let active = prev.v + cur.a * tau > 0.0;
            let (sin, cos) = cur.psi.sin_cos();
            grad[2 * (j - 1)] = p.a + if active { lvj * tau } else { 0.0 };
            grad[2 * (j - 1) + 1] =
                p.psi + lxj * (-prev.v * tau * sin) + lyj * (prev.v * tau * cos);
            lx = lxj;
            ly = lyj;
            lv = lvj;
        }
    }

    fn fd_gradient(&self, u: &[f64], pts: &mut Vec<TrajectoryPoint>, grad: &mut [f64]) {
        let h = self.cfg.grad_step;
        let mut w = u.to_vec();
        let base = self.cost(u, pts);
        for k in 0..u.len() {
            w[k] = u[k] + h;
            let up = self.cost(&w, pts);
            w[k] = u[k] - h;
            let dn = self.cost(&w, pts);
            w[k] = u[k];
            grad[k] = match (up.is_finite(), dn.is_finite()) {
                (true, true) => (up - dn) / (2.0 * h),
                (true, false) => (up - base) / h,
                (false, true) => (base - dn) / h,
                (false, false) => 0.0,
            };
        }
    }

    fn descend(&self, mut u: Vec<f64>) -> Option<Run> {
        let mut pts = Vec::with_capacity(self.horizon + 1);
        let mut objective = self.cost(&u, &mut pts);
        if !objective.is_finite() {
            return None;
        }
        let dim = u.len();
        let mut history = vec![objective];
        let mut g = vec![0.0; dim];
        let mut g_new = vec![0.0; dim];
        let mut trial = vec![0.0; dim];
        self.gradient(&u, &mut pts, &mut g);

        let g_inf = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if g_inf == 0.0 {
            return Some(Run {
                u,
                objective,
                converged: true,
                history,
            });
        }
        let mut step = 1.0 / g_inf;
        let mut converged = false;

        for _ in 0..self.cfg.max_iters {
            let mut t = step;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                for ((x, ui), gi) in trial.iter_mut().zip(&u).zip(&g) {
                    *x = ui - t * gi;
                }
                self.project(&mut trial);
                let mut decrease = 0.0;
                let mut moved = false;
                for ((x, ui), gi) in trial.iter().zip(&u).zip(&g) {
                    let d = x - ui;
                    moved |= d != 0.0;
                    decrease += gi * d;
                }
                if !moved {
                    break;
                }
                let cand = self.cost(&trial, &mut pts);
                if cand.is_finite() && cand <= objective + ARMIJO * decrease && cand <= objective {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            let Some(cand) = accepted else {
                // Projected stationary point, or no descent left at this precision.
                converged = true;
                break;
            };

            self.gradient(&trial, &mut pts, &mut g_new);
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..dim {
                let s = trial[k] - u[k];
                ss += s * s;
                sy += s * (g_new[k] - g[k]);
            }
            let small = objective - cand <= self.cfg.tol * objective.abs();
            std::mem::swap(&mut u, &mut trial);
            std::mem::swap(&mut g, &mut g_new);
            objective = cand;
            history.push(objective);
            step = if sy > 0.0 { ss / sy } else { 2.0 * t };
            if small {
                converged = true;
                break;
            }
        }
        Some(Run {
            u,
            objective,
            converged,
            history,
        })
    }
}
