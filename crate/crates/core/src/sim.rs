//! Synthetic yellow-light scenarios with known intention and driver
//! characteristic.
//!
//! A target vehicle approaches the stop bar under a car-following controller.
//! At the yellow onset the intent policy picks pass or stop; after a reaction
//! time the vehicle is driven by a receding-horizon planner that minimizes the
//! reference driver's feature cost, reweighted by the driver's λ. Replans
//! happen on the same 0.5 s grid (counted from the onset) that the online
//! predictor uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::step_unchecked;
use crate::error::{Error, Result};
use crate::features::{apply_lambda, FeatureScaling, WeightVector, FEATURE_COUNT};
use crate::intention::label_trajectory;
use crate::irl::{IrlModel, TrainMeta, TrainedWeights};
use crate::trajopt::{optimize_trajectory, OptimizerConfig};
use crate::types::{EnvironmentState, Intention, Trajectory, TrajectoryPoint, DEFAULT_TAU};

/// Label threshold: stop if more than this far upstream of the bar when the
/// yellow ends.
pub const D_LABEL: f64 = 3.0;
/// Where a vehicle with nobody ahead comes to rest, measured upstream of the bar.
pub const STOP_SETBACK: f64 = 4.0;
/// Standstill spacing behind a stopped front vehicle.
pub const STANDSTILL_GAP: f64 = 2.0;
pub const VEHICLE_LENGTH: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentPolicy {
    ForcePass,
    ForceStop,
    /// Stop with a probability that grows with how late the vehicle would
    /// reach the bar relative to the remaining yellow.
    DilemmaZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FvProfile {
    None,
    /// Front vehicle holds its speed through the intersection.
    Cruise,
    /// Front vehicle brakes for the yellow and stops at the bar.
    Brake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Approach speed range (m/s).
    pub speed_range: [f64; 2],
    /// Distance to the stop bar at the yellow onset (m).
    pub distance_range: [f64; 2],
    pub yellow_duration: f64,
    pub red_duration: f64,
    pub v_lim: f64,
    pub stop_bar_x: f64,
    /// Driver characteristic λ*.
    pub lambda: f64,
    pub policy: IntentPolicy,
    pub fv_profile: FvProfile,
    /// Simulated time before the onset (s).
    pub lead_time: f64,
    pub reaction_range: [f64; 2],
    /// Logistic stop rule: `p_stop = 1 / (1 + exp(-(tti - remaining - center) / scale))`.
    pub dilemma_center: f64,
    pub dilemma_scale: f64,
    pub a_max_naive: f64,
    pub replan_interval: f64,
    /// Recorded time after the vehicle clears the bar or comes to rest (s).
    pub tail: f64,
    pub max_duration: f64,
    /// Planner settings; the horizon applies to passing drivers.
    pub optimizer: OptimizerConfig,
    /// Planning horizon (steps) of stopping drivers.
    pub stop_horizon: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            speed_range: [9.0, 15.0],
            distance_range: [15.0, 70.0],
            yellow_duration: 3.5,
            red_duration: 30.0,
            v_lim: 15.0,
            stop_bar_x: 200.0,
            lambda: 0.5,
            policy: IntentPolicy::DilemmaZone,
            fv_profile: FvProfile::None,
            lead_time: 2.0,
            reaction_range: [0.5, 1.0],
            dilemma_center: -0.3,
            dilemma_scale: 0.6,
            a_max_naive: 2.0,
            replan_interval: 0.5,
            tail: 3.0,
            max_duration: 40.0,
            optimizer: OptimizerConfig::default(),
            stop_horizon: 100,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, r: [f64; 2], lo: f64| {
            if r[0].is_finite() && r[1].is_finite() && r[0] >= lo && r[0] < r[1] {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "{name} range {r:?} is degenerate"
                )))
            }
        };
        range("speed", self.speed_range, 0.5)?;
        range("distance", self.distance_range, 0.0)?;
        range("reaction", self.reaction_range, 0.0)?;
        if self.speed_range[1] > self.v_lim + 1e-9 {
            return Err(Error::Parameter(
                "approach speeds above the speed limit".into(),
            ));
        }
        for (name, v) in [
            ("yellow_duration", self.yellow_duration),
            ("v_lim", self.v_lim),
            ("dilemma_scale", self.dilemma_scale),
            ("lead_time", self.lead_time),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.red_duration >= 0.0 && self.tail >= 0.0 && self.max_duration > self.lead_time) {
            return Err(Error::Parameter("invalid red, tail or duration".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Parameter(format!(
                "λ* must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if (self.optimizer.tau - DEFAULT_TAU).abs() > 1e-12 {
            return Err(Error::Parameter("scenarios are sampled at 0.1 s".into()));
        }
        let k = self.replan_interval / self.optimizer.tau;
        if !(k >= 0.5 && (k - k.round()).abs() < 1e-6) {
            return Err(Error::Parameter(
                "replan interval must be a whole number of steps".into(),
            ));
        }
        let onset = self.lead_time / DEFAULT_TAU;
        if (onset - onset.round()).abs() > 1e-6 {
            return Err(Error::Parameter(
                "lead time must be a whole number of steps".into(),
            ));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub vehicle_id: String,
    pub trajectory: Trajectory,
    pub env: EnvironmentState,
    pub intention: Intention,
    /// Driver characteristic, when known.
    pub lambda: Option<f64>,
}

/// Weights of the reference driver that all synthetic vehicles share (before
/// λ reweighting), on unscaled features.
pub fn reference_model() -> IrlModel {
    let weights = |theta: [f64; FEATURE_COUNT], m| TrainedWeights {
        theta: WeightVector::new(theta, m).expect("positive reference weights"),
        scaling: FeatureScaling::identity(),
        meta: TrainMeta {
            epochs: 0,
            converged: true,
            final_gap: 0.0,
            gap_history: Vec::new(),
            min_theta: theta.iter().copied().fold(f64::INFINITY, f64::min),
            demos: 0,
        },
    };
    IrlModel {
        // speed limit, acceleration, headway, heading, lateral acceleration
        pass: weights([1.0, 4.0, 10.0, 100.0, 100.0], Intention::Pass),
        // acceleration, headway, heading, lateral acceleration, stop position
        stop: weights([1.0, 2.0, 100.0, 100.0, 0.2], Intention::Stop),
    }
}

struct Idm {
    v_des: f64,
    a_max: f64,
    b: f64,
    headway: f64,
    s0: f64,
}

impl Idm {
    fn accel(&self, p: &TrajectoryPoint, fv: Option<&TrajectoryPoint>) -> f64 {
        let mut a = self.a_max * (1.0 - (p.v / self.v_des).powi(4));
        if let Some(f) = fv {
            let s = (f.x - p.x - VEHICLE_LENGTH).max(0.1);
            let s_star = self.s0
                + (p.v * self.headway + p.v * (p.v - f.v) / (2.0 * (self.a_max * self.b).sqrt()))
                    .max(0.0);
            a -= self.a_max * (s_star / s).powi(2);
        }
        a
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Distance needed to stop from `v` when reacting after `react` s and then
/// braking at `decel`.
fn stopping_distance(v: f64, react: f64, decel: f64) -> f64 {
    v * react + v * v / (2.0 * decel)
}

/// Largest acceleration that still brings the vehicle to rest by `x_stop`
/// at constant deceleration under the discrete dynamics. Drivers never roll
/// past the end of the queue.
fn stop_line_accel(p: &TrajectoryPoint, x_stop: f64) -> f64 {
    let room = x_stop - p.x - 0.5 * p.v * DEFAULT_TAU;
    if p.v <= 0.0 {
        return 0.0;
    }
    if room <= 1e-3 {
        return -p.v / DEFAULT_TAU;
    }
    -(p.v * p.v) / (2.0 * room)
}

fn steps(t: f64) -> usize {
    (t / DEFAULT_TAU).round() as usize
}

struct Draws {
    v0: f64,
    distance: f64,
    reaction: f64,
    u_intent: f64,
    fv: Option<FvDraw>,
}

struct FvDraw {
    /// Time headway behind the front vehicle at the start (s).
    headway: f64,
    /// Delay after the onset before the front vehicle brakes (s).
    brake_delay: f64,
}

fn draw(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Draws {
    let v0 = rng.gen_range(cfg.speed_range[0]..cfg.speed_range[1]);
    let reaction = rng.gen_range(cfg.reaction_range[0]..cfg.reaction_range[1]);
    let u_intent: f64 = rng.gen();
    let fv = match cfg.fv_profile {
        FvProfile::None => None,
        _ => Some(FvDraw {
            headway: rng.gen_range(1.5..3.0),
            brake_delay: rng.gen_range(0.0..0.5),
        }),
    };
    let [lo, hi] = cfg.distance_range;
    let mut d_lo = lo;
    let mut d_hi = hi;
    let gap = |h: f64| VEHICLE_LENGTH + STANDSTILL_GAP + v0 * h;
    match (cfg.policy, cfg.fv_profile) {
        (_, FvProfile::Brake) | (IntentPolicy::ForceStop, _) => {
            // Room to stop comfortably; behind a braking front vehicle the
            // front vehicle itself must be able to stop before the bar.
            d_lo = d_lo.max(stopping_distance(v0, cfg.reaction_range[1], 3.0) + STOP_SETBACK + 2.0);
            if let (FvProfile::Brake, Some(f)) = (cfg.fv_profile, &fv) {
                d_lo = d_lo.max(gap(f.headway) + stopping_distance(v0, 0.5, 3.0) + 2.0);
            }
        }
        (IntentPolicy::ForcePass, _) => {
            d_hi = d_hi.min(v0 * (cfg.yellow_duration - cfg.reaction_range[1]) + D_LABEL * 0.5);
        }
        _ => {}
    }
    if d_hi <= d_lo {
        d_hi = d_lo + 1.0;
    }
    let distance = rng.gen_range(d_lo..d_hi);
    Draws {
        v0,
        distance,
        reaction,
        u_intent,
        fv,
    }
}

fn front_vehicle(cfg: &ScenarioConfig, d: &Draws, fv: &FvDraw, n: usize) -> Trajectory {
    let onset = cfg.lead_time;
    let x0 = cfg.stop_bar_x - d.distance - d.v0 * onset;
    let start = TrajectoryPoint::longitudinal(
        0.0,
        x0 + VEHICLE_LENGTH + STANDSTILL_GAP + d.v0 * fv.headway,
        d.v0,
        0.0,
    );
    let stop_at = cfg.stop_bar_x - 1.0;
    let brake_from = onset + fv.brake_delay;
    let mut decel = None;
    let mut pts = Vec::with_capacity(n);
    pts.push(start);
    for k in 1..n {
        let p = pts[k - 1];
        let mut a = 0.0;
        if cfg.fv_profile == FvProfile::Brake && p.t >= brake_from - 1e-9 {
            let b = *decel
                .get_or_insert_with(|| (p.v * p.v / (2.0 * (stop_at - p.x).max(1.0))).min(6.0));
            a = if p.v > 0.0 { -b } else { 0.0 };
        }
        let mut q = step_unchecked(&p, a, 0.0, DEFAULT_TAU);
        q.t = k as f64 * DEFAULT_TAU;
        pts.push(q);
    }
    Trajectory::from_parts_unchecked(pts, DEFAULT_TAU)
}

fn environment(cfg: &ScenarioConfig, fv: Option<Trajectory>) -> EnvironmentState {
    let x_queue = match cfg.fv_profile {
        FvProfile::Brake => cfg.stop_bar_x - 1.0 - VEHICLE_LENGTH - STANDSTILL_GAP,
        _ => cfg.stop_bar_x - STOP_SETBACK,
    };
    EnvironmentState {
        yellow_onset: cfg.lead_time,
        yellow_duration: cfg.yellow_duration,
        stop_bar_x: cfg.stop_bar_x,
        v_lim: cfg.v_lim,
        fv_trajectory: fv,
        x_queue,
        i_launch: steps(cfg.lead_time + cfg.yellow_duration + cfg.red_duration),
        a_max_naive: cfg.a_max_naive,
    }
}

fn choose(cfg: &ScenarioConfig, d: &Draws) -> Intention {
    if cfg.fv_profile == FvProfile::Brake {
        return Intention::Stop;
    }
    match cfg.policy {
        IntentPolicy::ForcePass => Intention::Pass,
        IntentPolicy::ForceStop => Intention::Stop,
        IntentPolicy::DilemmaZone => {
            let tti = d.distance / d.v0;
            let p_stop =
                logistic((tti - cfg.yellow_duration - cfg.dilemma_center) / cfg.dilemma_scale);
            if d.u_intent < p_stop {
                Intention::Stop
            } else {
                Intention::Pass
            }
        }
    }
}

fn drive(
    cfg: &ScenarioConfig,
    d: &Draws,
    env: &EnvironmentState,
    behavior: Intention,
    reference: &IrlModel,
) -> Result<Trajectory> {
    let onset = steps(cfg.lead_time);
    let stride = steps(cfg.replan_interval);
    let react = steps(d.reaction);
    let takeover = onset + react.div_ceil(stride) * stride;
    let max_steps = steps(cfg.max_duration);
    let idm = Idm {
        v_des: d.v0,
        a_max: 1.5,
        b: 2.0,
        headway: 1.5,
        s0: STANDSTILL_GAP,
    };
    let weights = reference.for_maneuver(behavior);
    let theta = apply_lambda(&weights.theta, cfg.lambda)?;
    let plan_cfg = match behavior {
        Intention::Pass => cfg.optimizer,
        Intention::Stop => OptimizerConfig {
            horizon: cfg.stop_horizon,
            ..cfg.optimizer
        },
    };

    let x0 = cfg.stop_bar_x - d.distance - d.v0 * cfg.lead_time;
    let mut pts = vec![TrajectoryPoint::longitudinal(0.0, x0, d.v0, 0.0)];
    let mut plan: Vec<(f64, f64)> = Vec::new();
    let mut done_at: Option<usize> = None;
    let yellow_end = steps(env.yellow_end());
    let tail = steps(cfg.tail);

    while pts.len() < max_steps {
        let k = pts.len() - 1;
        let p = pts[k];
        if done_at.is_none() {
            let cleared = p.x > cfg.stop_bar_x;
            let rest = p.v < 0.1 && (p.x - env.x_queue).abs() < 1.0;
            if (cleared || rest) && k >= yellow_end {
                done_at = Some(k);
            }
        }
        if done_at.is_some_and(|s| k >= s + tail) {
            break;
        }
        let (a, psi) = if k < takeover {
            let fv = env.fv_state_at(p.t);
            let a = idm
                .accel(&p, fv.as_ref())
                .clamp(cfg.optimizer.bounds.a_min, cfg.optimizer.bounds.a_max);
            (a, 0.0)
        } else {
            if (k - takeover).is_multiple_of(stride) {
                let out = optimize_trajectory(&theta, env, &p, &weights.scaling, &plan_cfg)?;
                plan = out
                    .trajectory
                    .controls()
                    .iter()
                    .map(|c| (c.a, c.psi))
                    .collect();
                plan.reverse();
            }
            let (a, psi) = plan.pop().unwrap_or((0.0, 0.0));
            match behavior {
                Intention::Pass => (a, psi),
                Intention::Stop => (
                    a.min(stop_line_accel(&p, env.x_queue))
                        .max(cfg.optimizer.bounds.a_min),
                    psi,
                ),
            }
        };
        let mut q = step_unchecked(&p, a, psi, DEFAULT_TAU);
        q.t = (k + 1) as f64 * DEFAULT_TAU;
        pts.push(q);
    }
    Ok(Trajectory::from_parts_unchecked(pts, DEFAULT_TAU))
}

/// Simulate one vehicle. The recorded intention is the label of the
/// produced trajectory; if the chosen behavior cannot produce its own label
/// (e.g. a stop decided too close to the bar), the other behavior is
/// simulated instead.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRecord> {
    generate_with(cfg, &reference_model())
}

pub fn generate_with(cfg: &ScenarioConfig, reference: &IrlModel) -> Result<ScenarioRecord> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = draw(cfg, &mut rng);
    let fv = d.fv.as_ref().map(|f| {
        front_vehicle(
            cfg,
            &d,
            f,
            steps(cfg.max_duration) + cfg.optimizer.horizon + 1,
        )
    });
    let env = environment(cfg, fv);
    let mut behavior = choose(cfg, &d);
    let mut traj = drive(cfg, &d, &env, behavior, reference)?;
    let mut label = label_trajectory(&traj, &env, D_LABEL)?;
    if label != behavior {
        behavior = behavior.other();
        traj = drive(cfg, &d, &env, behavior, reference)?;
        label = label_trajectory(&traj, &env, D_LABEL)?;
    }
    Ok(ScenarioRecord {
        vehicle_id: format!("{}", cfg.seed),
        trajectory: traj,
        env,
        intention: label,
        lambda: Some(cfg.lambda),
    })
}

/// Recipe for a batch of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSpec {
    pub count: usize,
    /// When set, keep drawing until exactly this many pass and stop records
    /// are collected (`count` is then ignored).
    pub quotas: Option<[usize; 2]>,
    pub policy: IntentPolicy,
    /// Relative frequencies of no / cruising / braking front vehicle.
    pub fv_mix: [f64; 3],
    /// λ* values drawn uniformly.
    pub lambdas: Vec<f64>,
    pub id_prefix: String,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            count: 60,
            quotas: None,
            policy: IntentPolicy::DilemmaZone,
            fv_mix: [0.5, 0.3, 0.2],
            lambdas: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            id_prefix: "veh".into(),
        }
    }
}

impl BatchSpec {
    pub fn train() -> Self {
        Self {
            quotas: Some([30, 30]),
            id_prefix: "train".into(),
            ..Self::default()
        }
    }

    pub fn test() -> Self {
        Self {
            id_prefix: "test".into(),
            ..Self::default()
        }
    }

    pub fn intention() -> Self {
        Self {
            count: 361,
            id_prefix: "int".into(),
            ..Self::default()
        }
    }
}

/// Generate a batch; record `i` is simulated with a seed and scene drawn
/// from `seed` alone, so batches are reproducible.
pub fn generate_batch(
    base: &ScenarioConfig,
    spec: &BatchSpec,
    seed: u64,
) -> Result<Vec<ScenarioRecord>> {
    generate_batch_with(base, spec, seed, &reference_model())
}

pub fn generate_batch_with(
    base: &ScenarioConfig,
    spec: &BatchSpec,
    seed: u64,
    reference: &IrlModel,
) -> Result<Vec<ScenarioRecord>> {
    let total: f64 = spec.fv_mix.iter().sum();
    if !(total > 0.0 && spec.fv_mix.iter().all(|w| *w >= 0.0)) || spec.lambdas.is_empty() {
        return Err(Error::Parameter(
            "batch needs a front-vehicle mix and λ values".into(),
        ));
    }
    let (target, limit) = match spec.quotas {
        Some(q) => (q[0] + q[1], 50 * (q[0] + q[1]).max(1)),
        None => (spec.count, spec.count),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(target);
    let mut have = [0usize; 2];
    for _ in 0..limit {
        if out.len() == target {
            break;
        }
        let u: f64 = rng.gen::<f64>() * total;
        let fv_profile = if u < spec.fv_mix[0] {
            FvProfile::None
        } else if u < spec.fv_mix[0] + spec.fv_mix[1] {
            FvProfile::Cruise
        } else {
            FvProfile::Brake
        };
        let lambda = spec.lambdas[rng.gen_range(0..spec.lambdas.len())];
        let cfg = ScenarioConfig {
            seed: rng.gen(),
            lambda,
            policy: spec.policy,
            fv_profile,
            ..base.clone()
        };
        let mut rec = generate_with(&cfg, reference)?;
        if let Some(q) = spec.quotas {
            let k = rec.intention.index();
            if have[k] >= q[k] {
                continue;
            }
            have[k] += 1;
        }
        rec.vehicle_id = format!("{}{:04}", spec.id_prefix, out.len());
        out.push(rec);
    }
    if out.len() < target {
        return Err(Error::DegenerateData(format!(
            "could not fill pass/stop quotas {:?} (got {have:?})",
            spec.quotas
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(cfg: ScenarioConfig) -> ScenarioRecord {
        generate_scenario(&cfg).unwrap()
    }

    #[test]
    fn force_pass_clears_the_bar() {
        let r = run(ScenarioConfig {
            seed: 3,
            policy: IntentPolicy::ForcePass,
            speed_range: [14.9, 15.0],
            ..Default::default()
        });
        assert_eq!(r.intention, Intention::Pass);
        assert!(r.trajectory.last().x > r.env.stop_bar_x);
    }

    #[test]
    fn force_stop_rests_at_queue() {
        for (seed, fv) in [
            (1, FvProfile::None),
            (2, FvProfile::Cruise),
            (3, FvProfile::Brake),
        ] {
            let r = run(ScenarioConfig {
                seed,
                policy: IntentPolicy::ForceStop,
                fv_profile: fv,
                ..Default::default()
            });
            let last = r.trajectory.last();
            assert_eq!(r.intention, Intention::Stop);
            assert!(last.v < 0.1, "{fv:?}: v {}", last.v);
            assert!(
                (last.x - r.env.x_queue).abs() < 1.0,
                "{fv:?}: x {} queue {}",
                last.x,
                r.env.x_queue
            );
        }
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = ScenarioConfig {
            seed: 11,
            fv_profile: FvProfile::Cruise,
            ..Default::default()
        };
        let a = serde_json::to_string(&run(cfg.clone())).unwrap();
        let b = serde_json::to_string(&run(cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectories_are_rollouts_and_labels_agree() {
        use crate::dynamics::rollout;
        use crate::types::ControlSequence;
        for seed in 0..12 {
            let fv = [FvProfile::None, FvProfile::Cruise, FvProfile::Brake][seed as usize % 3];
            let r = run(ScenarioConfig {
                seed,
                fv_profile: fv,
                ..Default::default()
            });
            let cs = ControlSequence::from_raw(r.trajectory.controls());
            let re = rollout(r.trajectory.first(), &cs, 0.1).unwrap();
            for (p, q) in re.points().iter().zip(r.trajectory.points()) {
                assert_eq!((p.x, p.y, p.v), (q.x, q.y, q.v));
            }
            assert_eq!(
                label_trajectory(&r.trajectory, &r.env, D_LABEL).unwrap(),
                r.intention
            );
            assert!(r.trajectory.start_time() < r.env.yellow_onset);
        }
    }

    #[test]
    fn quotas_are_met() {
        let spec = BatchSpec {
            quotas: Some([3, 2]),
            ..BatchSpec::default()
        };
        let recs = generate_batch(&ScenarioConfig::default(), &spec, 5).unwrap();
        assert_eq!(recs.len(), 5);
        assert_eq!(
            recs.iter()
                .filter(|r| r.intention == Intention::Pass)
                .count(),
            3
        );
        assert_eq!(recs[4].vehicle_id, "veh0004");
    }
}
