//! End-to-end steps over scenario records: training data extraction, model
//! fitting and rolling prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intention::{fit_bn, BnModel, IntentionEvidence};
use crate::irl::{train_maxent_irl, Demonstration, IrlModel, TrainConfig};
use crate::online::{rolling_predict, PredictionLog, RollingConfig};
use crate::sim::ScenarioRecord;
use crate::types::{Intention, TrajectoryPoint};

/// Every sample of the record that falls in the yellow phase.
pub fn yellow_points(rec: &ScenarioRecord) -> impl Iterator<Item = &TrajectoryPoint> {
    rec.trajectory
        .points()
        .iter()
        .filter(|p| rec.env.in_yellow(p.t))
}

/// Evidence at every yellow-phase sample, labeled with the record's intention.
pub fn intention_samples(records: &[ScenarioRecord]) -> Vec<(IntentionEvidence, Intention)> {
    records
        .iter()
        .flat_map(|r| {
            yellow_points(r).map(|p| (IntentionEvidence::observe(p, &r.env), r.intention))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnConfig {
    pub k_bins: usize,
    pub alpha: f64,
}

impl Default for BnConfig {
    fn default() -> Self {
        Self {
            k_bins: 5,
            alpha: 1.0,
        }
    }
}

pub fn train_bn(records: &[ScenarioRecord], cfg: &BnConfig) -> Result<BnModel> {
    let samples = intention_samples(records);
    if samples.is_empty() {
        return Err(Error::Coverage(
            "no yellow-phase samples in the training records".into(),
        ));
    }
    fit_bn(&samples, cfg.k_bins, cfg.alpha)
}

/// How demonstration windows are cut from recorded trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    /// Steps between window starts, counted from the yellow onset.
    pub stride: usize,
    pub max_per_record: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            stride: 5,
            max_per_record: 6,
        }
    }
}

/// Windows of `horizon + 1` samples starting at the yellow onset and every
/// `stride` steps after, from records with the given intention. Windows
/// starting after the vehicle has cleared the bar or come to rest at the
/// queue are skipped.
pub fn demonstrations(
    records: &[ScenarioRecord],
    maneuver: Intention,
    horizon: usize,
    cfg: &DemoConfig,
) -> Vec<Demonstration> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.intention == maneuver) {
        let Some(i0) = r.trajectory.first_index_at_or_after(r.env.yellow_onset) else {
            continue;
        };
        let mut i = i0;
        let mut taken = 0;
        while taken < cfg.max_per_record && i + horizon < r.trajectory.len() {
            let p = &r.trajectory.points()[i];
            if p.x > r.env.stop_bar_x || (p.v < 0.1 && (p.x - r.env.x_queue).abs() < 1.0) {
                break;
            }
            out.push(Demonstration {
                trajectory: r
                    .trajectory
                    .slice(i, i + horizon + 1)
                    .expect("window in range"),
                env: r.env.clone(),
            });
            taken += 1;
            i += cfg.stride.max(1);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlPipelineConfig {
    pub train: TrainConfig,
    pub demos: DemoConfig,
    /// Window length (steps) of stop demonstrations; pass windows use the
    /// optimizer horizon.
    pub stop_horizon: usize,
}

impl Default for IrlPipelineConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            demos: DemoConfig::default(),
            stop_horizon: 100,
        }
    }
}

/// Train pass and stop weights from labeled records.
pub fn train_irl(records: &[ScenarioRecord], cfg: &IrlPipelineConfig) -> Result<IrlModel> {
    let horizon = cfg.train.optimizer.horizon;
    let pass = train_maxent_irl(
        &demonstrations(records, Intention::Pass, horizon, &cfg.demos),
        Intention::Pass,
        &cfg.train,
    )?;
    let stop = train_maxent_irl(
        &demonstrations(
            records,
            Intention::Stop,
            cfg.stop_horizon.max(horizon),
            &cfg.demos,
        ),
        Intention::Stop,
        &cfg.train,
    )?;
    IrlModel::new(pass, stop)
}

/// Rolling prediction over every record, in order.
pub fn predict_records(
    records: &[ScenarioRecord],
    bn: &BnModel,
    irl: &IrlModel,
    cfg: &RollingConfig,
) -> Result<Vec<PredictionLog>> {
    records
        .iter()
        .map(|r| {
            let mut log = rolling_predict(&r.trajectory, &r.env, bn, irl, cfg)?;
            log.vehicle_id = Some(r.vehicle_id.clone());
            Ok(log)
        })
        .collect()
}
