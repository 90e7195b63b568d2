//! Brute-force reference computations on small random instances, used to
//! check the fast inference and gradient paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::rollout;
use crate::error::Result;
use crate::features::{compute_features, fit_scaling, FeatureScaling, WeightVector, FEATURE_COUNT};
use crate::intention::{
    discretize, infer_intention, BnModel, IntentionEvidence, IntentionPosterior,
};
use crate::irl::{enumerated_gradient, log_likelihood, softmin_probabilities, Demonstration};
use crate::types::{
    Control, ControlBounds, ControlSequence, EnvironmentState, Intention, Trajectory,
    TrajectoryPoint, DEFAULT_TAU,
};

/// The generator every check below is driven by in the CLI.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const RANGES: [(f64, f64); 5] = [
    (0.0, 3.5),
    (0.0, 8.0),
    (-5.0, 5.0),
    (0.0, 20.0),
    (-4.0, 3.0),
];

fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Network with 1 to `max_bins` bins per variable and random tables.
pub fn random_bn<R: Rng>(rng: &mut R, max_bins: usize) -> Result<BnModel> {
    let edges: [Vec<f64>; 5] = std::array::from_fn(|i| {
        let (lo, hi) = RANGES[i];
        let k = rng.gen_range(1..=max_bins.max(1));
        let mut e: Vec<f64> = (1..k).map(|_| rng.gen_range(lo..hi)).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    });
    let cells = (edges[0].len() + 1) * (edges[1].len() + 1) * (edges[2].len() + 1);
    let cpt_intention = (0..cells)
        .map(|_| {
            let p = rng.gen_range(0.02..0.98);
            [p, 1.0 - p]
        })
        .collect();
    let cpt_de = std::array::from_fn(|j| {
        let n = edges[3 + j].len() + 1;
        [random_row(rng, n), random_row(rng, n)]
    });
    BnModel::from_tables(max_bins, 1.0, edges, cpt_intention, cpt_de)
}

pub fn random_evidence<R: Rng>(rng: &mut R) -> IntentionEvidence {
    let v: [f64; 5] = std::array::from_fn(|i| {
        let (lo, hi) = RANGES[i];
        // Reach a little past the edge ranges so clamping is exercised.
        rng.gen_range(lo - 1.0..hi + 1.0)
    });
    IntentionEvidence {
        elapsed_yellow: v[0].max(0.0),
        tti: v[1].max(0.0),
        rel_speed: v[2],
        lon_speed: v[3],
        lon_accel: v[4],
    }
}

/// Posterior by summing the full joint over every assignment of the five
/// evidence bins and the intention, keeping those consistent with the
/// observation. The causal layer gets a uniform prior, which cancels.
pub fn brute_force_posterior(model: &BnModel, e: &IntentionEvidence) -> Result<IntentionPosterior> {
    let observed = discretize(e, model)?;
    let bins: [usize; 5] = std::array::from_fn(|v| model.bins(v));
    let cells = bins[0] * bins[1] * bins[2];
    let mut mass = [0.0f64; 2];
    let mut a = [0usize; 5];
    loop {
        for (l, intention) in [Intention::Pass, Intention::Stop].into_iter().enumerate() {
            let joint = model.cpt_intention()[model.cell_index(&a)][l] / cells as f64
                * model.cpt_de(0, intention)[a[3]]
                * model.cpt_de(1, intention)[a[4]];
            if a == observed {
                mass[l] += joint;
            }
        }
        // Odometer increment over the assignment.
        let mut v = 0;
        while v < 5 {
            a[v] += 1;
            if a[v] < bins[v] {
                break;
            }
            a[v] = 0;
            v += 1;
        }
        if v == 5 {
            break;
        }
    }
    let z = mass[0] + mass[1];
    Ok(IntentionPosterior {
        p_pass: mass[0] / z,
        p_stop: mass[1] / z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnCheck {
    pub models: usize,
    pub max_abs_error: f64,
}

/// Compare `infer_intention` with the brute force on random models of up to
/// `max_bins` bins, one random evidence vector each.
pub fn check_bn<R: Rng>(rng: &mut R, models: usize, max_bins: usize) -> Result<BnCheck> {
    let mut worst = 0.0f64;
    for _ in 0..models {
        let m = random_bn(rng, max_bins)?;
        let e = random_evidence(rng);
        let fast = infer_intention(&m, &e)?;
        let slow = brute_force_posterior(&m, &e)?;
        worst = worst
            .max((fast.p_pass - slow.p_pass).abs())
            .max((fast.p_stop - slow.p_stop).abs());
    }
    Ok(BnCheck {
        models,
        max_abs_error: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftminCheck {
    pub sets: usize,
    pub max_sum_error: f64,
    pub all_finite: bool,
}

/// Normalization of the softmin on random cost sets spread over `span`.
pub fn check_softmin<R: Rng>(rng: &mut R, sets: usize, span: f64) -> Result<SoftminCheck> {
    let mut worst = 0.0f64;
    let mut finite = true;
    for _ in 0..sets {
        let n = rng.gen_range(2..50);
        let offset = rng.gen_range(-span..span);
        let mut costs: Vec<f64> = (0..n).map(|_| offset + rng.gen_range(0.0..span)).collect();
        // Pin both ends so the set spans the full range.
        costs[0] = offset;
        costs[1] = offset + span;
        let p = softmin_probabilities(&costs)?;
        finite &= p.iter().all(|x| x.is_finite() && *x >= 0.0);
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    Ok(SoftminCheck {
        sets,
        max_sum_error: worst,
        all_finite: finite,
    })
}

/// Small enumerable max-ent problem: a few scenes behind a cruising front
/// vehicle, each with a handful of random short trajectories, the first of
/// which is the demonstration.
#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub theta: WeightVector,
    pub scaling: FeatureScaling,
    pub demos: Vec<Demonstration>,
    pub candidates: Vec<Vec<Trajectory>>,
}

pub fn toy_instance<R: Rng>(
    rng: &mut R,
    demos: usize,
    per_set: usize,
    horizon: usize,
) -> Result<ToyInstance> {
    let bounds = ControlBounds::default();
    let mut out_demos = Vec::with_capacity(demos);
    let mut sets = Vec::with_capacity(demos);
    let mut feats = Vec::new();
    for _ in 0..demos {
        let v0 = rng.gen_range(8.0..14.0);
        let gap = rng.gen_range(15.0..30.0);
        let fv_v = rng.gen_range(8.0..14.0);
        let fv = (0..=horizon)
            .map(|i| {
                let t = i as f64 * DEFAULT_TAU;
                TrajectoryPoint::longitudinal(t, gap + fv_v * t, fv_v, 0.0)
            })
            .collect();
        let env = EnvironmentState {
            yellow_onset: 0.0,
            yellow_duration: 3.5,
            stop_bar_x: 200.0,
            v_lim: 12.0,
            fv_trajectory: Some(Trajectory::new(fv, DEFAULT_TAU)?),
            x_queue: 195.0,
            i_launch: 10_000,
            a_max_naive: 2.0,
        };
        let init = TrajectoryPoint::longitudinal(0.0, 0.0, v0, 0.0);
        let mut set = Vec::with_capacity(per_set);
        for _ in 0..per_set {
            let controls = (0..horizon)
                .map(|_| Control {
                    a: rng.gen_range(-2.0..2.0),
                    psi: rng.gen_range(-0.05..0.05),
                })
                .collect();
            let tr = rollout(&init, &ControlSequence::new(controls, bounds)?, DEFAULT_TAU)?;
            feats.push(compute_features(&tr, &env, Intention::Pass)?);
            set.push(tr);
        }
        out_demos.push(Demonstration {
            trajectory: set[0].clone(),
            env,
        });
        sets.push(set);
    }
    let theta = WeightVector::new(
        std::array::from_fn(|_| rng.gen_range(0.5..2.0)),
        Intention::Pass,
    )?;
    Ok(ToyInstance {
        theta,
        scaling: fit_scaling(&feats)?,
        demos: out_demos,
        candidates: sets,
    })
}

/// Central differences of the exact log-likelihood in each weight.
pub fn finite_difference_gradient(inst: &ToyInstance, h: f64) -> Result<[f64; FEATURE_COUNT]> {
    let mut g = [0.0; FEATURE_COUNT];
    for (k, gk) in g.iter_mut().enumerate() {
        let mut up = inst.theta;
        let mut down = inst.theta;
        up.theta[k] += h;
        down.theta[k] -= h;
        let lu = log_likelihood(&up, &inst.demos, &inst.candidates, &inst.scaling)?;
        let ld = log_likelihood(&down, &inst.demos, &inst.candidates, &inst.scaling)?;
        *gk = (lu - ld) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub instances: usize,
    pub candidates: usize,
    /// Worst of `|g - g_fd|_inf / |g_fd|_inf` over the instances.
    pub max_rel_error: f64,
}

pub fn check_gradient<R: Rng>(rng: &mut R, instances: usize) -> Result<GradientCheck> {
    let mut worst = 0.0f64;
    let mut candidates = 0;
    for _ in 0..instances {
        let inst = toy_instance(rng, 3, 10, 8)?;
        candidates = inst.candidates.iter().map(Vec::len).sum();
        let g = enumerated_gradient(&inst.theta, &inst.demos, &inst.candidates, &inst.scaling)?;
        let fd = finite_difference_gradient(&inst, 1e-5)?;
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
        let err = g
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    Ok(GradientCheck {
        instances,
        candidates,
        max_rel_error: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_network_returns_its_prior() {
        let m = BnModel::from_tables(
            1,
            1.0,
            Default::default(),
            vec![[0.3, 0.7]],
            [[vec![1.0], vec![1.0]], [vec![1.0], vec![1.0]]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = brute_force_posterior(&m, &random_evidence(&mut rng)).unwrap();
        assert!((p.p_pass - 0.3).abs() < 1e-15);
    }

    #[test]
    fn checks_pass_on_a_few_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(check_bn(&mut rng, 20, 3).unwrap().max_abs_error <= 1e-12);
        assert!(check_softmin(&mut rng, 20, 1e3).unwrap().max_sum_error <= 1e-12);
        let g = check_gradient(&mut rng, 2).unwrap();
        assert_eq!(g.candidates, 30);
        assert!(g.max_rel_error <= 1e-4, "{g:?}");
    }
}
