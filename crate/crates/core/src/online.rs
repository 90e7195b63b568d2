//! Rolling-horizon prediction with an online driver characteristic.
//!
//! Every replan cycle the predictor infers the pass/stop intention, picks the
//! matching weights, and solves the trajectory optimization once per grid
//! value of the driver characteristic λ. The prediction for the current λ is
//! logged; all candidates are kept so that at the next cycle λ can move to
//! the grid value whose candidate best matched what the vehicle actually did.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{points_distance, rollout};
use crate::error::{Error, Result};
use crate::features::apply_lambda;
use crate::intention::{infer_intention, BnModel, IntentionEvidence, IntentionPosterior};
use crate::irl::IrlModel;
use crate::trajopt::{optimize_trajectory, OptimizerConfig};
use crate::types::{
    Control, ControlSequence, EnvironmentState, Intention, Trajectory, TrajectoryPoint, TIME_EPS,
};

/// Candidate EDs closer than this count as tied.
const TIE_EPS: f64 = 1e-12;

/// The driver characteristic λ, restricted to a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverCharacteristic {
    grid: Vec<f64>,
    index: usize,
}

impl DriverCharacteristic {
    pub fn new(grid: Vec<f64>, initial: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Parameter("λ grid is empty".into()));
        }
        if grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Parameter(format!("λ grid {grid:?} leaves [0, 1]")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "λ grid {grid:?} is not strictly increasing"
            )));
        }
        let index = grid
            .iter()
            .position(|l| (l - initial).abs() <= 1e-12)
            .ok_or_else(|| Error::Parameter(format!("initial λ {initial} is not on the grid")))?;
        Ok(Self { grid, index })
    }

    /// `{0.1, 0.2, ..., 0.9}`.
    pub fn default_grid() -> Vec<f64> {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    }

    pub fn lambda(&self) -> f64 {
        self.grid[self.index]
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

impl Default for DriverCharacteristic {
    fn default() -> Self {
        Self::new(Self::default_grid(), 0.5).expect("default grid contains 0.5")
    }
}

/// Constant speed, constant heading from `state`.
pub fn constant_velocity_baseline(
    state: &TrajectoryPoint,
    horizon: usize,
    tau: f64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least one step".into()));
    }
    let controls = vec![
        Control {
            a: 0.0,
            psi: state.psi
        };
        horizon
    ];
    rollout(state, &ControlSequence::from_raw(controls), tau)
}

/// Move λ to the grid value whose candidate is closest (mean planar
/// distance) to the observed window. Ties keep the value closest to the
/// current λ, then the smaller one.
pub fn update_lambda(
    dc: &DriverCharacteristic,
    candidates: &[Trajectory],
    observed: &Trajectory,
) -> Result<DriverCharacteristic> {
    if candidates.len() != dc.grid.len() {
        return Err(Error::Shape(format!(
            "{} candidates for a grid of {}",
            candidates.len(),
            dc.grid.len()
        )));
    }
    let n = observed.len();
    let mut eds = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.len() < n {
            return Err(Error::Shape(format!(
                "observed window of {n} points is longer than a {}-point candidate",
                c.len()
            )));
        }
        if (c.start_time() - observed.start_time()).abs() > TIME_EPS
            || (c.dt() - observed.dt()).abs() > TIME_EPS
        {
            return Err(Error::Shape(format!(
                "observed window starts at {} (dt {}) but candidate starts at {} (dt {})",
                observed.start_time(),
                observed.dt(),
                c.start_time(),
                c.dt()
            )));
        }
        eds.push(points_distance(&c.points()[..n], observed.points())?);
    }
    let best = eds.iter().copied().fold(f64::INFINITY, f64::min);
    let current = dc.lambda();
    let index = (0..eds.len())
        .filter(|&i| eds[i] <= best + TIE_EPS)
        .min_by(|&i, &j| {
            let di = (dc.grid[i] - current).abs();
            let dj = (dc.grid[j] - current).abs();
            di.total_cmp(&dj).then(i.cmp(&j))
        })
        .expect("at least one candidate");
    Ok(DriverCharacteristic {
        grid: dc.grid.clone(),
        index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub replan_interval: f64,
    pub lambda_grid: Vec<f64>,
    pub initial_lambda: f64,
    /// Horizon and step of each prediction come from here.
    pub optimizer: OptimizerConfig,
    /// Stop maneuvers are planned this many steps ahead (through to the
    /// stop) and cut back to the prediction horizon.
    pub stop_horizon: usize,
    /// First cycle time; defaults to the yellow onset.
    pub start_time: Option<f64>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            replan_interval: 0.5,
            lambda_grid: DriverCharacteristic::default_grid(),
            initial_lambda: 0.5,
            optimizer: OptimizerConfig::default(),
            stop_horizon: 100,
            start_time: None,
        }
    }
}

impl RollingConfig {
    fn cycle_stride(&self) -> Result<usize> {
        self.optimizer.validate()?;
        let k = self.replan_interval / self.optimizer.tau;
        if !(k.is_finite() && k >= 0.5 && (k - k.round()).abs() < 1e-6) {
            return Err(Error::Parameter(format!(
                "replan interval {} is not a whole number of {} s steps",
                self.replan_interval, self.optimizer.tau
            )));
        }
        Ok(k.round() as usize)
    }
}

/// One replan cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub t: f64,
    pub posterior: IntentionPosterior,
    pub maneuver: Intention,
    pub lambda: f64,
    pub pred: Trajectory,
    pub baseline: Trajectory,
    /// ED of `pred` against the realized trajectory, over the future points
    /// available in the stream.
    pub ed_realized: Option<f64>,
    pub baseline_ed: Option<f64>,
    /// Why this cycle fell back to a reused prediction, if it did.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionLog {
    pub vehicle_id: Option<String>,
    pub cycles: Vec<CycleRecord>,
}

#[derive(Serialize, Deserialize)]
struct CycleLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vehicle_id: Option<String>,
    t: f64,
    p_pass: f64,
    p_stop: f64,
    maneuver: Intention,
    lambda: f64,
    dt: f64,
    pred: Vec<[f64; 3]>,
    baseline: Vec<[f64; 3]>,
    ed_realized: Option<f64>,
    #[serde(default)]
    baseline_ed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fallback: Option<String>,
}

fn triples(tr: &Trajectory) -> Vec<[f64; 3]> {
    tr.points().iter().map(|p| [p.x, p.y, p.v]).collect()
}

fn from_triples(t0: f64, dt: f64, rows: &[[f64; 3]]) -> Result<Trajectory> {
    let pts = rows
        .iter()
        .enumerate()
        .map(|(k, r)| TrajectoryPoint::new(t0 + k as f64 * dt, r[0], r[1], r[2], 0.0, 0.0))
        .collect();
    Trajectory::new(pts, dt)
}

impl PredictionLog {
    /// One JSON object per cycle, newline terminated.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.cycles {
            let line = CycleLine {
                vehicle_id: self.vehicle_id.clone(),
                t: c.t,
                p_pass: c.posterior.p_pass,
                p_stop: c.posterior.p_stop,
                maneuver: c.maneuver,
                lambda: c.lambda,
                dt: c.pred.dt(),
                pred: triples(&c.pred),
                baseline: triples(&c.baseline),
                ed_realized: c.ed_realized,
                baseline_ed: c.baseline_ed,
                fallback: c.fallback.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Read logs written by [`write_json_lines`](Self::write_json_lines),
    /// grouped by vehicle in order of first appearance. Only positions and
    /// speeds survive the round trip.
    pub fn read_json_lines<R: BufRead>(r: R) -> Result<Vec<PredictionLog>> {
        let mut logs: Vec<PredictionLog> = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: CycleLine = serde_json::from_str(&line)?;
            let rec = CycleRecord {
                t: c.t,
                posterior: IntentionPosterior {
                    p_pass: c.p_pass,
                    p_stop: c.p_stop,
                },
                maneuver: c.maneuver,
                lambda: c.lambda,
                pred: from_triples(c.t, c.dt, &c.pred)?,
                baseline: from_triples(c.t, c.dt, &c.baseline)?,
                ed_realized: c.ed_realized,
                baseline_ed: c.baseline_ed,
                fallback: c.fallback,
            };
            match logs.iter_mut().find(|l| l.vehicle_id == c.vehicle_id) {
                Some(l) => l.cycles.push(rec),
                None => logs.push(PredictionLog {
                    vehicle_id: c.vehicle_id,
                    cycles: vec![rec],
                }),
            }
        }
        Ok(logs)
    }
}

/// ED between a prediction and the realized stream over the future points
/// they share (the common initial point is excluded). `None` if there is no
/// overlap.
pub fn realized_distance(pred: &Trajectory, stream: &Trajectory) -> Option<f64> {
    let i0 = stream.index_at(pred.start_time())?;
    let n = (pred.len() - 1).min(stream.len() - 1 - i0);
    if n == 0 {
        return None;
    }
    points_distance(&pred.points()[1..=n], &stream.points()[i0 + 1..=i0 + n]).ok()
}

/// Per-vehicle predictor state.
#[derive(Debug, Clone)]
pub struct RollingPredictor<'a> {
    env: &'a EnvironmentState,
    bn: &'a BnModel,
    irl: &'a IrlModel,
    cfg: OptimizerConfig,
    stop_horizon: usize,
    dc: DriverCharacteristic,
    candidates: Option<Vec<Trajectory>>,
    last_pred: Option<Trajectory>,
    last_posterior: Option<IntentionPosterior>,
}

impl<'a> RollingPredictor<'a> {
    pub fn new(
        env: &'a EnvironmentState,
        bn: &'a BnModel,
        irl: &'a IrlModel,
        cfg: &RollingConfig,
    ) -> Result<Self> {
        env.validate()?;
        cfg.optimizer.validate()?;
        Ok(Self {
            env,
            bn,
            irl,
            cfg: cfg.optimizer,
            stop_horizon: cfg.stop_horizon.max(cfg.optimizer.horizon),
            dc: DriverCharacteristic::new(cfg.lambda_grid.clone(), cfg.initial_lambda)?,
            candidates: None,
            last_pred: None,
            last_posterior: None,
        })
    }

    pub fn characteristic(&self) -> &DriverCharacteristic {
        &self.dc
    }

    /// Run one cycle. `history` holds every sample observed so far; its last
    /// point is the current state.
    pub fn cycle(&mut self, history: &Trajectory) -> Result<CycleRecord> {
        let state = *history.last();
        let t = state.t;
        let mut fallback = None;

        if let Some(cands) = self.candidates.take() {
            let t_prev = cands[0].start_time();
            let i0 = history.index_at(t_prev).ok_or_else(|| {
                Error::Shape(format!(
                    "history has no sample at previous cycle t={t_prev}"
                ))
            })?;
            let window = history.slice(i0, history.len())?;
            self.dc = update_lambda(&self.dc, &cands, &window)?;
        }

        let posterior = IntentionEvidence::observe(&state, self.env)
            .validate()
            .and_then(|_| infer_intention(self.bn, &IntentionEvidence::observe(&state, self.env)));
        let posterior = match posterior {
            Ok(p) => p,
            Err(e) => {
                fallback = Some(format!("intention: {e}"));
                self.last_posterior.unwrap_or(IntentionPosterior {
                    p_pass: 0.5,
                    p_stop: 0.5,
                })
            }
        };
        let maneuver = posterior.argmax();
        self.last_posterior = Some(posterior);

        let cands = self.solve_candidates(&state, maneuver);
        let pred = match cands {
            Ok(c) => {
                let p = c[self.dc.index()].clone();
                self.candidates = Some(c);
                p
            }
            Err(e) => {
                fallback = Some(match fallback {
                    Some(f) => format!("{f}; trajectory: {e}"),
                    None => format!("trajectory: {e}"),
                });
                self.shifted_previous(&state)?
            }
        };
        self.last_pred = Some(pred.clone());

        Ok(CycleRecord {
            t,
            posterior,
            maneuver,
            lambda: self.dc.lambda(),
            pred,
            baseline: constant_velocity_baseline(&state, self.cfg.horizon, self.cfg.tau)?,
            ed_realized: None,
            baseline_ed: None,
            fallback,
        })
    }

    fn solve_candidates(
        &self,
        state: &TrajectoryPoint,
        maneuver: Intention,
    ) -> Result<Vec<Trajectory>> {
        let weights = self.irl.for_maneuver(maneuver);
        let plan = OptimizerConfig {
            horizon: match maneuver {
                Intention::Pass => self.cfg.horizon,
                Intention::Stop => self.stop_horizon,
            },
            ..self.cfg
        };
        self.dc
            .grid()
            .iter()
            .map(|&l| {
                let theta = apply_lambda(&weights.theta, l)?;
                let tr = optimize_trajectory(&theta, self.env, state, &weights.scaling, &plan)?
                    .trajectory;
                tr.slice(0, self.cfg.horizon + 1)
            })
            .collect()
    }

    /// Previous prediction's remaining controls replayed from the current
    /// state, padded with coasting; the baseline if there is none.
    fn shifted_previous(&self, state: &TrajectoryPoint) -> Result<Trajectory> {
        let Some(prev) = &self.last_pred else {
            return constant_velocity_baseline(state, self.cfg.horizon, self.cfg.tau);
        };
        let shift = ((state.t - prev.start_time()) / prev.dt()).round().max(0.0) as usize;
        let mut controls: Vec<Control> = prev.controls().into_iter().skip(shift).collect();
        let psi = controls.last().map_or(state.psi, |c| c.psi);
        controls.resize(self.cfg.horizon, Control { a: 0.0, psi });
        rollout(state, &ControlSequence::from_raw(controls), self.cfg.tau)
    }
}

/// Predict a whole episode from a recorded stream.
///
/// Cycles start at the first sample at or after the start time (the yellow
/// onset by default) and repeat every replan interval while the stream has a
/// later sample. The episode ends once the vehicle is past the stop bar or
/// at rest within 1 m of the queue end. Each cycle sees only the samples up
/// to its own time; realized EDs are filled in afterwards from the stream.
pub fn rolling_predict(
    stream: &Trajectory,
    env: &EnvironmentState,
    bn: &BnModel,
    irl: &IrlModel,
    cfg: &RollingConfig,
) -> Result<PredictionLog> {
    let stride = cfg.cycle_stride()?;
    if (stream.dt() - cfg.optimizer.tau).abs() > TIME_EPS {
        return Err(Error::Parameter(format!(
            "stream step {} differs from the prediction step {}",
            stream.dt(),
            cfg.optimizer.tau
        )));
    }
    let start = cfg.start_time.unwrap_or(env.yellow_onset);
    let first = stream.first_index_at_or_after(start).ok_or_else(|| {
        Error::Coverage(format!(
            "stream ends at {} before t={start}",
            stream.end_time()
        ))
    })?;

    let mut predictor = RollingPredictor::new(env, bn, irl, cfg)?;
    let mut log = PredictionLog::default();
    let mut i = first;
    while i + 1 < stream.len() {
        let s = &stream.points()[i];
        if s.x > env.stop_bar_x || (s.v < 0.1 && (s.x - env.x_queue).abs() < 1.0) {
            break;
        }
        let history = stream.slice(0, i + 1)?;
        let mut rec = predictor.cycle(&history)?;
        rec.ed_realized = realized_distance(&rec.pred, stream);
        rec.baseline_ed = realized_distance(&rec.baseline, stream);
        log.cycles.push(rec);
        i += stride;
    }
    Ok(log)
}
