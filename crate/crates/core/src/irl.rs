//! Maximum-entropy inverse reinforcement learning of the feature weights.
//!
//! Under the max-ent model a trajectory's probability within its candidate set
//! is a softmin of the weighted feature costs. The likelihood gradient is the
//! expected feature vector minus the empirical one; for continuous
//! trajectories the expectation is replaced by the features of the single most
//! likely (cost-minimizing) trajectory, found with the trajectory optimizer.
//! Weights are kept positive by ascending in `eta = ln(theta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    compute_features_with, feature_order, fit_scaling, Feature, FeatureScaling, FeatureVector,
    WeightVector, FEATURE_COUNT,
};
use crate::trajopt::{objective_with, optimize_trajectory, OptimizerConfig};
use crate::types::{EnvironmentState, Intention, Trajectory};

/// Keeps `exp(eta)` finite and strictly positive.
const ETA_LIMIT: f64 = 700.0;

/// A demonstrated trajectory window and the scene it was driven in. The first
/// point is the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    pub env: EnvironmentState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Stop when the infinity norm of the feature-expectation gap falls to this.
    pub grad_tol: f64,
    pub max_epochs: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            grad_tol: 0.05,
            max_epochs: 300,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::Parameter("grad_tol must be positive".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    /// Number of gap evaluations (optimizer sweeps over the dataset).
    pub epochs: usize,
    pub converged: bool,
    /// Gap norm of the returned weights.
    pub final_gap: f64,
    pub gap_history: Vec<f64>,
    /// Smallest weight entry over all epochs.
    pub min_theta: f64,
    pub demos: usize,
}

/// Learned weights for one maneuver together with the scaling they act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WeightsJson", try_from = "WeightsJson")]
pub struct TrainedWeights {
    pub theta: WeightVector,
    pub scaling: FeatureScaling,
    pub meta: TrainMeta,
}

#[derive(Serialize, Deserialize)]
struct WeightsJson {
    theta: [f64; FEATURE_COUNT],
    scaling: [f64; FEATURE_COUNT],
    feature_order: [Feature; FEATURE_COUNT],
    train_meta: TrainMeta,
}

impl From<TrainedWeights> for WeightsJson {
    fn from(w: TrainedWeights) -> Self {
        Self {
            theta: w.theta.theta,
            scaling: w.scaling.scale,
            feature_order: feature_order(w.theta.maneuver),
            train_meta: w.meta,
        }
    }
}

impl TryFrom<WeightsJson> for TrainedWeights {
    type Error = Error;

    fn try_from(j: WeightsJson) -> Result<Self> {
        let maneuver = [Intention::Pass, Intention::Stop]
            .into_iter()
            .find(|m| feature_order(*m) == j.feature_order)
            .ok_or_else(|| {
                Error::Parameter(format!("unknown feature order {:?}", j.feature_order))
            })?;
        let scaling = FeatureScaling { scale: j.scaling };
        scaling.validate()?;
        Ok(Self {
            theta: WeightVector::new(j.theta, maneuver)?,
            scaling,
            meta: j.train_meta,
        })
    }
}

/// Weights for both maneuvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlModel {
    pub pass: TrainedWeights,
    pub stop: TrainedWeights,
}

impl IrlModel {
    pub fn new(pass: TrainedWeights, stop: TrainedWeights) -> Result<Self> {
        if pass.theta.maneuver != Intention::Pass || stop.theta.maneuver != Intention::Stop {
            return Err(Error::Parameter("maneuver sections are swapped".into()));
        }
        Ok(Self { pass, stop })
    }

    pub fn for_maneuver(&self, m: Intention) -> &TrainedWeights {
        match m {
            Intention::Pass => &self.pass,
            Intention::Stop => &self.stop,
        }
    }
}

/// Softmin over costs, shifted by the minimum so wide cost ranges stay finite.
pub fn softmin_probabilities(costs: &[f64]) -> Result<Vec<f64>> {
    if costs.is_empty() {
        return Err(Error::Parameter("candidate set is empty".into()));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Parameter("candidate cost is not finite".into()));
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = costs.iter().map(|c| (lo - c).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

fn log_softmin(costs: &[f64], index: usize) -> f64 {
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let z: f64 = costs.iter().map(|c| (lo - c).exp()).sum();
    (lo - costs[index]) - z.ln()
}

fn candidate_costs(
    theta: &WeightVector,
    candidates: &[Trajectory],
    env: &EnvironmentState,
    scaling: &FeatureScaling,
    opt: &OptimizerConfig,
) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|c| objective_with(c, theta, env, scaling, &opt.features))
        .collect()
}

/// Probability of each candidate under the max-ent model.
pub fn maxent_probability(
    theta: &WeightVector,
    candidates: &[Trajectory],
    env: &EnvironmentState,
    scaling: &FeatureScaling,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Parameter("candidate set is empty".into()));
    }
    let len = candidates[0].len();
    if candidates.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("candidates have different horizons".into()));
    }
    softmin_probabilities(&candidate_costs(
        theta,
        candidates,
        env,
        scaling,
        &OptimizerConfig::default(),
    )?)
}

fn demo_index(demo: &Demonstration, set: &[Trajectory], j: usize) -> Result<usize> {
    set.iter()
        .position(|c| *c == demo.trajectory)
        .ok_or_else(|| Error::Parameter(format!("demonstration {j} is not in its candidate set")))
}

/// Mean log-probability of the demonstrations within their candidate sets.
pub fn log_likelihood(
    theta: &WeightVector,
    demos: &[Demonstration],
    candidate_sets: &[Vec<Trajectory>],
    scaling: &FeatureScaling,
) -> Result<f64> {
    check_sets(demos, candidate_sets)?;
    let opt = OptimizerConfig::default();
    let mut total = 0.0;
    for (j, (demo, set)) in demos.iter().zip(candidate_sets).enumerate() {
        let idx = demo_index(demo, set, j)?;
        let costs = candidate_costs(theta, set, &demo.env, scaling, &opt)?;
        total += log_softmin(&costs, idx);
    }
    Ok(total / demos.len() as f64)
}

fn check_sets(demos: &[Demonstration], candidate_sets: &[Vec<Trajectory>]) -> Result<()> {
    if demos.is_empty() {
        return Err(Error::Parameter("no demonstrations".into()));
    }
    if demos.len() != candidate_sets.len() {
        return Err(Error::Shape(format!(
            "{} demonstrations but {} candidate sets",
            demos.len(),
            candidate_sets.len()
        )));
    }
    Ok(())
}

/// Exact likelihood gradient when each candidate set is enumerated:
/// expected scaled features under the softmin minus the empirical mean.
pub fn enumerated_gradient(
    theta: &WeightVector,
    demos: &[Demonstration],
    candidate_sets: &[Vec<Trajectory>],
    scaling: &FeatureScaling,
) -> Result<[f64; FEATURE_COUNT]> {
    check_sets(demos, candidate_sets)?;
    let opt = OptimizerConfig::default();
    let m = demos.len() as f64;
    let mut grad = [0.0; FEATURE_COUNT];
    for (j, (demo, set)) in demos.iter().zip(candidate_sets).enumerate() {
        demo_index(demo, set, j)?;
        let costs = candidate_costs(theta, set, &demo.env, scaling, &opt)?;
        let probs = softmin_probabilities(&costs)?;
        let own = scaled_features(&demo.trajectory, &demo.env, theta.maneuver, scaling, &opt)?;
        for (c, p) in set.iter().zip(&probs) {
            let f = scaled_features(c, &demo.env, theta.maneuver, scaling, &opt)?;
            for k in 0..FEATURE_COUNT {
                grad[k] += p * f[k] / m;
            }
        }
        for k in 0..FEATURE_COUNT {
            grad[k] -= own[k] / m;
        }
    }
    Ok(grad)
}

fn scaled_features(
    traj: &Trajectory,
    env: &EnvironmentState,
    maneuver: Intention,
    scaling: &FeatureScaling,
    opt: &OptimizerConfig,
) -> Result<[f64; FEATURE_COUNT]> {
    Ok(compute_features_with(traj, env, maneuver, &opt.features)?.scaled(scaling))
}

fn raw_demo_features(
    demos: &[Demonstration],
    maneuver: Intention,
    opt: &OptimizerConfig,
) -> Result<Vec<FeatureVector>> {
    demos
        .iter()
        .enumerate()
        .map(|(j, d)| {
            compute_features_with(&d.trajectory, &d.env, maneuver, &opt.features).map_err(|e| {
                Error::TrainingData {
                    demo: j,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

fn mean(rows: &[[f64; FEATURE_COUNT]]) -> [f64; FEATURE_COUNT] {
    let m = rows.len() as f64;
    std::array::from_fn(|k| rows.iter().map(|r| r[k]).sum::<f64>() / m)
}

/// Mean scaled features of the cost-minimizing trajectory for each demo's
/// initial condition and scene.
pub fn expected_features(
    theta: &WeightVector,
    demos: &[Demonstration],
    scaling: &FeatureScaling,
    opt: &OptimizerConfig,
) -> Result<[f64; FEATURE_COUNT]> {
    let rows = demos
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let cfg = OptimizerConfig {
                horizon: d.trajectory.len() - 1,
                tau: d.trajectory.dt(),
                ..*opt
            };
            let wrap = |e| Error::TrainingData {
                demo: j,
                source: Box::new(e),
            };
            let out = optimize_trajectory(theta, &d.env, d.trajectory.first(), scaling, &cfg)
                .map_err(wrap)?;
            scaled_features(&out.trajectory, &d.env, theta.maneuver, scaling, opt).map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&rows))
}

/// Approximate likelihood gradient: features of the most likely trajectory
/// per demo, averaged, minus the empirical mean (all scaled).
pub fn likelihood_gradient(
    theta: &WeightVector,
    demos: &[Demonstration],
    scaling: &FeatureScaling,
    opt: &OptimizerConfig,
) -> Result<[f64; FEATURE_COUNT]> {
    if demos.is_empty() {
        return Err(Error::Parameter("no demonstrations".into()));
    }
    let empirical = raw_demo_features(demos, theta.maneuver, opt)?;
    let empirical: Vec<_> = empirical.iter().map(|f| f.scaled(scaling)).collect();
    let target = mean(&empirical);
    let expected = expected_features(theta, demos, scaling, opt)?;
    Ok(std::array::from_fn(|k| expected[k] - target[k]))
}

/// Learn the weights of one maneuver from its demonstrations.
///
/// Scaling is fitted first so the empirical mean feature vector is all ones
/// (zero for features that never occur). Starting from `theta = 1`, each
/// epoch solves the trajectory optimization for every demo, takes the gap
/// between the mean optimized features and the empirical mean, and ascends in
/// log space: `eta += lr * gap * theta`, `theta = exp(eta)`. Training stops
/// once the gap's infinity norm is within `grad_tol`; otherwise the weights
/// with the smallest gap seen are returned with `converged = false`.
pub fn train_maxent_irl(
    demos: &[Demonstration],
    maneuver: Intention,
    cfg: &TrainConfig,
) -> Result<TrainedWeights> {
    cfg.validate()?;
    if demos.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least two demonstrations, got {}",
            demos.len()
        )));
    }
    if let Some(j) = demos.iter().position(|d| d.trajectory.len() < 2) {
        return Err(Error::TrainingData {
            demo: j,
            source: Box::new(Error::Shape("demonstration has a single point".into())),
        });
    }
    let raw = raw_demo_features(demos, maneuver, &cfg.optimizer)?;
    let scaling = fit_scaling(&raw)?;
    let scaled: Vec<_> = raw.iter().map(|f| f.scaled(&scaling)).collect();
    let target = mean(&scaled);

    let mut eta = [0.0f64; FEATURE_COUNT];
    let mut theta = WeightVector::ones(maneuver);
    let mut best: Option<(f64, WeightVector)> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut min_theta = 1.0f64;

    for _ in 0..cfg.max_epochs {
        let expected = expected_features(&theta, demos, &scaling, &cfg.optimizer)?;
        let gap: [f64; FEATURE_COUNT] = std::array::from_fn(|k| expected[k] - target[k]);
        let norm = gap.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        history.push(norm);
        if best.as_ref().is_none_or(|(b, _)| norm < *b) {
            best = Some((norm, theta));
        }
        if norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        for k in 0..FEATURE_COUNT {
            eta[k] =
                (eta[k] + cfg.learning_rate * gap[k] * theta.theta[k]).clamp(-ETA_LIMIT, ETA_LIMIT);
            theta.theta[k] = eta[k].exp();
            min_theta = min_theta.min(theta.theta[k]);
        }
    }

    let (final_gap, theta) = if converged {
        (*history.last().unwrap(), theta)
    } else {
        best.expect("at least one epoch runs")
    };
    Ok(TrainedWeights {
        theta,
        scaling,
        meta: TrainMeta {
            epochs: history.len(),
            converged,
            final_gap,
            gap_history: history,
            min_theta,
            demos: demos.len(),
        },
    })
}
