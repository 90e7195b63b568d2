//! Evaluation of intention and trajectory predictions, and tidy plot data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intention::{infer_intention, naive_intention, BnModel, IntentionEvidence};
use crate::online::{realized_distance, PredictionLog};
use crate::pipeline::yellow_points;
use crate::sim::ScenarioRecord;
use crate::types::Intention;

pub const DECILES: usize = 10;

/// Counts with Pass as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    fn add(&mut self, truth: Intention, pred: Intention) {
        match (truth, pred) {
            (Intention::Pass, Intention::Pass) => self.tp += 1,
            (Intention::Stop, Intention::Stop) => self.tn += 1,
            (Intention::Stop, Intention::Pass) => self.fp += 1,
            (Intention::Pass, Intention::Stop) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub decile: usize,
    /// Elapsed-yellow fraction covered by this bucket.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub accuracy: Option<f64>,
    pub naive_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionReport {
    pub points: usize,
    pub accuracy: f64,
    pub naive_accuracy: f64,
    pub confusion: Confusion,
    pub naive_confusion: Confusion,
    pub deciles: Vec<DecileRow>,
}

/// Score the BN and the naive baseline at every yellow-phase sample. Deciles
/// bucket samples by elapsed yellow as a fraction of the yellow duration.
pub fn evaluate_intention(bn: &BnModel, records: &[ScenarioRecord]) -> Result<IntentionReport> {
    let mut confusion = Confusion::default();
    let mut naive = Confusion::default();
    let mut buckets = vec![(Confusion::default(), Confusion::default()); DECILES];
    for r in records {
        for p in yellow_points(r) {
            let post = infer_intention(bn, &IntentionEvidence::observe(p, &r.env))?;
            let nv = naive_intention(p, &r.env, p.t)?;
            confusion.add(r.intention, post.argmax());
            naive.add(r.intention, nv);
            let frac = (p.t - r.env.yellow_onset) / r.env.yellow_duration;
            let d = ((frac * DECILES as f64 + 1e-9).floor().max(0.0) as usize).min(DECILES - 1);
            buckets[d].0.add(r.intention, post.argmax());
            buckets[d].1.add(r.intention, nv);
        }
    }
    if confusion.total() == 0 {
        return Err(Error::Coverage("no yellow-phase points to evaluate".into()));
    }
    let deciles = buckets
        .iter()
        .enumerate()
        .map(|(d, (bn, nv))| DecileRow {
            decile: d,
            lo: d as f64 / DECILES as f64,
            hi: (d + 1) as f64 / DECILES as f64,
            points: bn.total(),
            accuracy: (bn.total() > 0).then(|| bn.accuracy()),
            naive_accuracy: (nv.total() > 0).then(|| nv.accuracy()),
        })
        .collect();
    Ok(IntentionReport {
        points: confusion.total(),
        accuracy: confusion.accuracy(),
        naive_accuracy: naive.accuracy(),
        confusion,
        naive_confusion: naive,
        deciles,
    })
}

/// Per-cycle errors of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleError {
    pub vehicle_id: String,
    pub t: f64,
    pub intention: Intention,
    pub ed: f64,
    pub baseline_ed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub vehicles: usize,
    pub cycles: usize,
    pub skipped_cycles: usize,
    pub mean_ed: f64,
    pub baseline_mean_ed: f64,
    /// Keyed by the ground-truth intention.
    pub mean_ed_by_intention: BTreeMap<Intention, f64>,
    pub baseline_mean_ed_by_intention: BTreeMap<Intention, f64>,
    /// Fraction of cycles where the model's ED is strictly below the baseline's.
    pub win_rate: f64,
    #[serde(skip)]
    pub errors: Vec<CycleError>,
    pub diagnostics: Vec<String>,
}

/// Order-independent mean.
fn mean(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Score prediction logs against the recorded trajectories, truncating each
/// prediction to the realized overlap.
pub fn evaluate_trajectory(
    logs: &[PredictionLog],
    truth: &[ScenarioRecord],
) -> Result<TrajectoryReport> {
    let by_id: BTreeMap<&str, &ScenarioRecord> =
        truth.iter().map(|r| (r.vehicle_id.as_str(), r)).collect();
    let mut errors = Vec::new();
    let mut diagnostics = Vec::new();
    let mut skipped = 0;
    for log in logs {
        let id = log
            .vehicle_id
            .as_deref()
            .ok_or_else(|| Error::Parameter("prediction log without a vehicle id".into()))?;
        let rec = by_id
            .get(id)
            .ok_or_else(|| Error::Parameter(format!("no ground truth for vehicle `{id}`")))?;
        for c in &log.cycles {
            match (
                realized_distance(&c.pred, &rec.trajectory),
                realized_distance(&c.baseline, &rec.trajectory),
            ) {
                (Some(ed), Some(b)) => errors.push(CycleError {
                    vehicle_id: id.to_string(),
                    t: c.t,
                    intention: rec.intention,
                    ed,
                    baseline_ed: b,
                }),
                _ => {
                    skipped += 1;
                    diagnostics.push(format!(
                        "{id} t={:.1}: no realized overlap, cycle skipped",
                        c.t
                    ));
                }
            }
        }
    }
    if errors.is_empty() {
        return Err(Error::Coverage(
            "no prediction cycle overlaps the ground truth".into(),
        ));
    }
    let pick = |f: fn(&CycleError) -> f64, m: Option<Intention>| {
        mean(
            errors
                .iter()
                .filter(|e| m.is_none_or(|m| e.intention == m))
                .map(f)
                .collect(),
        )
    };
    let mut by = BTreeMap::new();
    let mut base_by = BTreeMap::new();
    for m in [Intention::Pass, Intention::Stop] {
        if errors.iter().any(|e| e.intention == m) {
            by.insert(m, pick(|e| e.ed, Some(m)));
            base_by.insert(m, pick(|e| e.baseline_ed, Some(m)));
        }
    }
    let wins = errors.iter().filter(|e| e.ed < e.baseline_ed).count();
    let mut vehicles: Vec<&str> = errors.iter().map(|e| e.vehicle_id.as_str()).collect();
    vehicles.sort_unstable();
    vehicles.dedup();
    let vehicles = vehicles.len();
    let mean_ed = pick(|e| e.ed, None);
    let baseline_mean_ed = pick(|e| e.baseline_ed, None);
    errors.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id).then(a.t.total_cmp(&b.t)));
    diagnostics.sort();
    Ok(TrajectoryReport {
        vehicles,
        cycles: errors.len(),
        skipped_cycles: skipped,
        mean_ed,
        baseline_mean_ed,
        mean_ed_by_intention: by,
        baseline_mean_ed_by_intention: base_by,
        win_rate: wins as f64 / errors.len() as f64,
        errors,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intention: Option<IntentionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryReport>,
}

/// `decile,lo,hi,method,accuracy,points` rows.
pub fn intention_plot_csv(report: &IntentionReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["decile", "lo", "hi", "method", "accuracy", "points"])?;
    for d in &report.deciles {
        for (method, acc) in [("bn", d.accuracy), ("naive", d.naive_accuracy)] {
            w.write_record([
                d.decile.to_string(),
                d.lo.to_string(),
                d.hi.to_string(),
                method.to_string(),
                acc.map_or(String::new(), |a| a.to_string()),
                d.points.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `vehicle_id,t,intention,method,ed` rows.
pub fn trajectory_plot_csv(report: &TrajectoryReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vehicle_id", "t", "intention", "method", "ed"])?;
    for e in &report.errors {
        for (method, ed) in [("model", e.ed), ("baseline", e.baseline_ed)] {
            w.write_record([
                e.vehicle_id.clone(),
                e.t.to_string(),
                e.intention.to_string(),
                method.to_string(),
                ed.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `vehicle_id,cycle_t,source,t,x,y` rows: predicted, baseline and realized
/// positions for every cycle.
pub fn prediction_plot_csv(logs: &[PredictionLog], truth: &[ScenarioRecord]) -> Result<Vec<u8>> {
    let by_id: BTreeMap<&str, &ScenarioRecord> =
        truth.iter().map(|r| (r.vehicle_id.as_str(), r)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vehicle_id", "cycle_t", "source", "t", "x", "y"])?;
    for log in logs {
        let id = log.vehicle_id.as_deref().unwrap_or("");
        for c in &log.cycles {
            let mut rows = vec![("model", &c.pred), ("baseline", &c.baseline)];
            let realized;
            if let Some(rec) = by_id.get(id) {
                if let Some(i0) = rec.trajectory.index_at(c.t) {
                    let end = (i0 + c.pred.len()).min(rec.trajectory.len());
                    realized = rec.trajectory.slice(i0, end)?;
                    rows.push(("truth", &realized));
                }
            }
            for (source, tr) in rows {
                for p in tr.points() {
                    w.write_record([
                        id.to_string(),
                        c.t.to_string(),
                        source.to_string(),
                        p.t.to_string(),
                        p.x.to_string(),
                        p.y.to_string(),
                    ])?;
                }
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
