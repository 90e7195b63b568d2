//! Discrete pass/stop intention during the yellow phase.
//!
//! A three-layer discrete Bayesian network: causal evidence (elapsed yellow,
//! time to intersection, relative speed) feeds the intention node, which in
//! turn explains the diagnostic evidence (longitudinal speed and
//! acceleration). The posterior is
//!
//! ```text
//! P(INT | CE, DE) = P(INT | CE) * prod_j P(DE_j | INT) / sum over INT of the same
//! ```
//!
//! Continuous evidence is discretized with equal-frequency bins fitted on the
//! training set. Counts are Laplace-smoothed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EnvironmentState, Intention, Trajectory, TrajectoryPoint};

pub const EVIDENCE_NAMES: [&str; 5] = [
    "elapsed_yellow",
    "tti",
    "rel_speed",
    "lon_speed",
    "lon_accel",
];
const CAUSAL: usize = 3;
const DIAGNOSTIC: usize = 2;

pub const TTI_CAP: f64 = 30.0;
const TTI_MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionEvidence {
    pub elapsed_yellow: f64,
    pub tti: f64,
    /// Target speed minus front-vehicle speed; positive when closing in.
    pub rel_speed: f64,
    pub lon_speed: f64,
    pub lon_accel: f64,
}

impl IntentionEvidence {
    /// Evidence observed at one trajectory point.
    pub fn observe(p: &TrajectoryPoint, env: &EnvironmentState) -> Self {
        let rel_speed = env.fv_state_at(p.t).map(|fv| p.v - fv.v).unwrap_or(0.0);
        Self {
            elapsed_yellow: (p.t - env.yellow_onset).max(0.0),
            tti: time_to_intersection(p, env.stop_bar_x),
            rel_speed,
            lon_speed: p.v,
            lon_accel: p.a,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.elapsed_yellow,
            self.tti,
            self.rel_speed,
            self.lon_speed,
            self.lon_accel,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEvidence(format!(
                "{} is not finite",
                EVIDENCE_NAMES[i]
            )));
        }
        if self.elapsed_yellow < 0.0 || self.tti < 0.0 {
            return Err(Error::InvalidEvidence(format!(
                "elapsed_yellow and tti must be nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Time to reach the stop bar at the current speed, in `[0, TTI_CAP]`.
pub fn time_to_intersection(p: &TrajectoryPoint, stop_bar_x: f64) -> f64 {
    ((stop_bar_x - p.x) / p.v.max(TTI_MIN_SPEED)).clamp(0.0, TTI_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionPosterior {
    pub p_pass: f64,
    pub p_stop: f64,
}

impl IntentionPosterior {
    /// Most probable intention; ties resolve to `Stop`.
    pub fn argmax(&self) -> Intention {
        if self.p_pass > self.p_stop {
            Intention::Pass
        } else {
            Intention::Stop
        }
    }

    pub fn probability(&self, i: Intention) -> f64 {
        match i {
            Intention::Pass => self.p_pass,
            Intention::Stop => self.p_stop,
        }
    }
}

/// Fitted network: bin edges plus conditional probability tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BnModelJson", try_from = "BnModelJson")]
pub struct BnModel {
    k_bins: usize,
    alpha: f64,
    edges: [Vec<f64>; 5],
    /// `[P(pass | cell), P(stop | cell)]`, row-major over causal bin triples.
    cpt_intention: Vec<[f64; 2]>,
    /// `cpt_de[j][int][bin] = P(DE_j = bin | INT = int)`.
    cpt_de: [[Vec<f64>; 2]; DIAGNOSTIC],
}

#[derive(Serialize, Deserialize)]
struct BnModelJson {
    k_bins: usize,
    alpha: f64,
    bin_edges: BTreeMap<String, Vec<f64>>,
    cpt_intention: Vec<[f64; 2]>,
    cpt_de: BTreeMap<String, [Vec<f64>; 2]>,
}

impl From<BnModel> for BnModelJson {
    fn from(m: BnModel) -> Self {
        let bin_edges = EVIDENCE_NAMES
            .iter()
            .zip(m.edges)
            .map(|(n, e)| (n.to_string(), e))
            .collect();
        let cpt_de = EVIDENCE_NAMES[CAUSAL..]
            .iter()
            .zip(m.cpt_de)
            .map(|(n, t)| (n.to_string(), t))
            .collect();
        Self {
            k_bins: m.k_bins,
            alpha: m.alpha,
            bin_edges,
            cpt_intention: m.cpt_intention,
            cpt_de,
        }
    }
}

impl TryFrom<BnModelJson> for BnModel {
    type Error = Error;

    fn try_from(mut j: BnModelJson) -> Result<Self> {
        let mut take_edges = |name: &str| {
            j.bin_edges
                .remove(name)
                .ok_or_else(|| Error::Parameter(format!("missing bin edges for {name}")))
        };
        let edges = [
            take_edges(EVIDENCE_NAMES[0])?,
            take_edges(EVIDENCE_NAMES[1])?,
            take_edges(EVIDENCE_NAMES[2])?,
            take_edges(EVIDENCE_NAMES[3])?,
            take_edges(EVIDENCE_NAMES[4])?,
        ];
        let mut take_de = |name: &str| {
            j.cpt_de
                .remove(name)
                .ok_or_else(|| Error::Parameter(format!("missing diagnostic table for {name}")))
        };
        let cpt_de = [take_de(EVIDENCE_NAMES[3])?, take_de(EVIDENCE_NAMES[4])?];
        let model = BnModel {
            k_bins: j.k_bins,
            alpha: j.alpha,
            edges,
            cpt_intention: j.cpt_intention,
            cpt_de,
        };
        model.validate()?;
        Ok(model)
    }
}

impl BnModel {
    /// Build a model from explicit tables. Rows are validated.
    pub fn from_tables(
        k_bins: usize,
        alpha: f64,
        edges: [Vec<f64>; 5],
        cpt_intention: Vec<[f64; 2]>,
        cpt_de: [[Vec<f64>; 2]; 2],
    ) -> Result<Self> {
        let m = Self {
            k_bins,
            alpha,
            edges,
            cpt_intention,
            cpt_de,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn k_bins(&self) -> usize {
        self.k_bins
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn edges(&self, var: usize) -> &[f64] {
        &self.edges[var]
    }

    /// Number of bins actually used by evidence variable `var`.
    pub fn bins(&self, var: usize) -> usize {
        self.edges[var].len() + 1
    }

    pub fn cpt_intention(&self) -> &[[f64; 2]] {
        &self.cpt_intention
    }

    /// `P(DE_j = bin | intention)` for diagnostic variable `j` (0 = speed, 1 = accel).
    pub fn cpt_de(&self, j: usize, intention: Intention) -> &[f64] {
        &self.cpt_de[j][intention.index()]
    }

    pub fn cell_index(&self, bins: &[usize; 5]) -> usize {
        (bins[0] * self.bins(1) + bins[1]) * self.bins(2) + bins[2]
    }

    fn validate(&self) -> Result<()> {
        for (name, e) in EVIDENCE_NAMES.iter().zip(&self.edges) {
            if e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parameter(format!(
                    "bin edges of {name} must be finite and strictly increasing"
                )));
            }
        }
        let cells: usize = (0..CAUSAL).map(|v| self.bins(v)).product();
        if self.cpt_intention.len() != cells {
            return Err(Error::Shape(format!(
                "intention table has {} rows, expected {cells}",
                self.cpt_intention.len()
            )));
        }
        let row_ok = |row: &[f64]| {
            row.iter().all(|p| p.is_finite() && *p > 0.0)
                && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if let Some(i) = self.cpt_intention.iter().position(|r| !row_ok(r)) {
            return Err(Error::Parameter(format!(
                "intention table row {i} is not a distribution"
            )));
        }
        for (j, table) in self.cpt_de.iter().enumerate() {
            let bins = self.bins(CAUSAL + j);
            for row in table {
                if row.len() != bins || !row_ok(row) {
                    return Err(Error::Parameter(format!(
                        "diagnostic table for {} is not a distribution over {bins} bins",
                        EVIDENCE_NAMES[CAUSAL + j]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn bin_of(edges: &[f64], value: f64) -> usize {
    edges.partition_point(|e| *e <= value)
}

/// Map each evidence variable to its bin. Out-of-range values clamp to the
/// first or last bin.
pub fn discretize(e: &IntentionEvidence, model: &BnModel) -> Result<[usize; 5]> {
    if let Some(i) = e.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidEvidence(format!(
            "{} is not finite",
            EVIDENCE_NAMES[i]
        )));
    }
    let v = e.values();
    Ok(std::array::from_fn(|i| bin_of(&model.edges[i], v[i])))
}

/// Equal-frequency interior edges; duplicates collapse so edges stay strictly
/// increasing.
fn quantile_edges(values: &mut [f64], k_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut edges: Vec<f64> = Vec::with_capacity(k_bins - 1);
    for k in 1..k_bins {
        let idx = k * n / k_bins;
        if idx == 0 || idx >= n {
            continue;
        }
        let edge = 0.5 * (values[idx - 1] + values[idx]);
        if edges.last().is_none_or(|last| edge > *last) {
            edges.push(edge);
        }
    }
    edges
}

pub fn fit_bn(
    dataset: &[(IntentionEvidence, Intention)],
    k_bins: usize,
    alpha: f64,
) -> Result<BnModel> {
    if dataset.is_empty() {
        return Err(Error::Parameter(
            "cannot fit a network on an empty dataset".into(),
        ));
    }
    if k_bins < 2 {
        return Err(Error::Parameter(format!(
            "k_bins must be at least 2, got {k_bins}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Parameter(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    for (e, _) in dataset {
        e.validate()?;
    }
    let first = dataset[0].1;
    if dataset.iter().all(|(_, l)| *l == first) {
        return Err(Error::DegenerateData(format!(
            "every sample is labelled {first}"
        )));
    }

    let edges: [Vec<f64>; 5] = std::array::from_fn(|i| {
        let mut col: Vec<f64> = dataset.iter().map(|(e, _)| e.values()[i]).collect();
        quantile_edges(&mut col, k_bins)
    });
    let bins: [usize; 5] = std::array::from_fn(|i| edges[i].len() + 1);
    let cells = bins[0] * bins[1] * bins[2];

    let mut int_counts = vec![[0.0f64; 2]; cells];
    let mut de_counts: [[Vec<f64>; 2]; DIAGNOSTIC] =
        std::array::from_fn(|j| [vec![0.0; bins[CAUSAL + j]], vec![0.0; bins[CAUSAL + j]]]);
    let mut label_totals = [0.0f64; 2];
    for (e, label) in dataset {
        let v = e.values();
        let b: [usize; 5] = std::array::from_fn(|i| bin_of(&edges[i], v[i]));
        let cell = (b[0] * bins[1] + b[1]) * bins[2] + b[2];
        let l = label.index();
        int_counts[cell][l] += 1.0;
        label_totals[l] += 1.0;
        for j in 0..DIAGNOSTIC {
            de_counts[j][l][b[CAUSAL + j]] += 1.0;
        }
    }

    let cpt_intention = int_counts
        .iter()
        .map(|c| {
            let total = c[0] + c[1] + 2.0 * alpha;
            [(c[0] + alpha) / total, (c[1] + alpha) / total]
        })
        .collect();
    let cpt_de = std::array::from_fn(|j| {
        std::array::from_fn(|l| {
            let counts = &de_counts[j][l];
            let total = label_totals[l] + alpha * counts.len() as f64;
            counts.iter().map(|c| (c + alpha) / total).collect()
        })
    });
    BnModel::from_tables(k_bins, alpha, edges, cpt_intention, cpt_de)
}

pub fn infer_intention(model: &BnModel, e: &IntentionEvidence) -> Result<IntentionPosterior> {
    let b = discretize(e, model)?;
    let prior = model.cpt_intention[model.cell_index(&b)];
    let mut score = prior;
    for j in 0..DIAGNOSTIC {
        for (l, s) in score.iter_mut().enumerate() {
            *s *= model.cpt_de[j][l][b[CAUSAL + j]];
        }
    }
    let z = score[0] + score[1];
    Ok(IntentionPosterior {
        p_pass: score[0] / z,
        p_stop: score[1] / z,
    })
}

/// Stop when the vehicle is more than `d_label` upstream of the stop bar at
/// the end of the yellow phase, pass otherwise.
pub fn label_trajectory(
    traj: &Trajectory,
    env: &EnvironmentState,
    d_label: f64,
) -> Result<Intention> {
    let end = env.yellow_end();
    if traj.end_time() < end - crate::types::TIME_EPS || traj.start_time() > end {
        return Err(Error::Coverage(format!(
            "trajectory spans [{}, {}] but yellow ends at {end}",
            traj.start_time(),
            traj.end_time()
        )));
    }
    let x = traj.state_at(end).x;
    Ok(if env.stop_bar_x - x > d_label {
        Intention::Stop
    } else {
        Intention::Pass
    })
}

/// Distance covered in `t` seconds when accelerating at `a_max` up to `v_cap`.
pub fn max_travel(v: f64, a_max: f64, v_cap: f64, t: f64) -> f64 {
    if v >= v_cap || a_max <= 0.0 {
        return v * t;
    }
    let t_acc = ((v_cap - v) / a_max).min(t);
    v * t_acc + 0.5 * a_max * t_acc * t_acc + (v + a_max * t_acc) * (t - t_acc)
}

/// Baseline: pass iff the vehicle could reach the stop bar before the yellow
/// ends.
pub fn naive_intention(
    state: &TrajectoryPoint,
    env: &EnvironmentState,
    now: f64,
) -> Result<Intention> {
    if !env.in_yellow(now) {
        return Err(Error::Phase(format!(
            "t={now} is outside the yellow phase [{}, {})",
            env.yellow_onset,
            env.yellow_end()
        )));
    }
    let remaining = env.yellow_end() - now;
    let travel = max_travel(state.v, env.a_max_naive, env.v_lim, remaining);
    Ok(if travel >= env.stop_bar_x - state.x {
        Intention::Pass
    } else {
        Intention::Stop
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ev(vals: [f64; 5]) -> IntentionEvidence {
        IntentionEvidence {
            elapsed_yellow: vals[0],
            tti: vals[1],
            rel_speed: vals[2],
            lon_speed: vals[3],
            lon_accel: vals[4],
        }
    }

    fn env() -> EnvironmentState {
        EnvironmentState {
            yellow_onset: 0.0,
            yellow_duration: 3.0,
            stop_bar_x: 100.0,
            v_lim: 12.0,
            fv_trajectory: None,
            x_queue: 99.0,
            i_launch: 1000,
            a_max_naive: 0.0,
        }
    }

    fn two_bin_model(edges: [f64; 5], cpt_int: Vec<[f64; 2]>, de: [[Vec<f64>; 2]; 2]) -> BnModel {
        BnModel::from_tables(2, 1.0, edges.map(|e| vec![e]), cpt_int, de).unwrap()
    }

    #[test]
    fn discretize_clamps_and_bins() {
        let edges = [
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
        ];
        let m = BnModel::from_tables(
            5,
            1.0,
            edges,
            vec![[0.5, 0.5]; 20],
            [[vec![0.5; 2], vec![0.5; 2]], [vec![0.5; 2], vec![0.5; 2]]],
        )
        .unwrap();
        let bins = |x| discretize(&ev([x, 0.0, 0.0, 0.0, 0.0]), &m).unwrap()[0];
        assert_eq!(bins(-10.0), 0);
        assert_eq!(bins(10.0), 4);
        assert_eq!(bins(2.5), 2);
        assert!(matches!(
            discretize(&ev([f64::NAN, 0.0, 0.0, 0.0, 0.0]), &m),
            Err(Error::InvalidEvidence(_))
        ));
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_bn(&[], 5, 1.0), Err(Error::Parameter(_))));
        let one = vec![(ev([0.0, 1.0, 0.0, 1.0, 0.0]), Intention::Pass); 4];
        assert!(matches!(
            fit_bn(&one, 5, 1.0),
            Err(Error::DegenerateData(_))
        ));
    }

    /// 40 samples; every variable's median split is at 0.5.
    fn forty() -> Vec<(IntentionEvidence, Intention)> {
        (0..40)
            .map(|i: usize| {
                let bit = |k: usize| ((i >> k) & 1) as f64;
                // Alternate the low bit so each variable is split 20/20.
                let vals = [bit(0), bit(1), bit(2), bit(3), (i % 5 < 2) as u8 as f64];
                let label = if (i * 7 + i / 3).is_multiple_of(3) {
                    Intention::Stop
                } else {
                    Intention::Pass
                };
                (ev(vals), label)
            })
            .collect()
    }

    #[test]
    fn fit_matches_hand_counts() {
        let data = forty();
        let m = fit_bn(&data, 2, 1.0).unwrap();
        for v in 0..5 {
            let ones = data.iter().filter(|(e, _)| e.values()[v] > 0.5).count();
            if ones == 20 {
                assert_eq!(m.edges(v), &[0.5]);
            }
        }
        // Oracle: explicit nested loops with the 0.5 threshold.
        let hi = |x: f64| (x > 0.5) as usize;
        for c0 in 0..2 {
            for c1 in 0..2 {
                for c2 in 0..2 {
                    let mut n = [0.0; 2];
                    for (e, l) in &data {
                        let v = e.values();
                        if hi(v[0]) == c0 && hi(v[1]) == c1 && hi(v[2]) == c2 {
                            n[l.index()] += 1.0;
                        }
                    }
                    let want = [
                        (n[0] + 1.0) / (n[0] + n[1] + 2.0),
                        (n[1] + 1.0) / (n[0] + n[1] + 2.0),
                    ];
                    let got = m.cpt_intention()[(c0 * 2 + c1) * 2 + c2];
                    assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
                }
            }
        }
        for j in 0..2 {
            for label in [Intention::Pass, Intention::Stop] {
                let of_label: Vec<_> = data.iter().filter(|(_, l)| *l == label).collect();
                for bin in 0..m.bins(3 + j) {
                    let n = of_label
                        .iter()
                        .filter(|(e, _)| bin_of(m.edges(3 + j), e.values()[3 + j]) == bin)
                        .count();
                    let want = (n as f64 + 1.0) / (of_label.len() as f64 + m.bins(3 + j) as f64);
                    assert!((m.cpt_de(j, label)[bin] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unobserved_cell_is_uniform() {
        // Elapsed and TTI are perfectly correlated so (0, 1, *) never occurs.
        let data: Vec<_> = (0..20)
            .map(|i| {
                let b = (i % 2) as f64;
                let label = if i % 2 == 0 {
                    Intention::Stop
                } else {
                    Intention::Pass
                };
                (ev([b, b, (i % 4 / 2) as f64, 1.0, 0.0]), label)
            })
            .collect();
        let m = fit_bn(&data, 2, 1.0).unwrap();
        let cell = m.cell_index(&[0, 1, 0, 0, 0]);
        assert_eq!(m.cpt_intention()[cell], [0.5, 0.5]);
    }

    #[test]
    fn separable_diagnostic_approaches_indicator() {
        let data: Vec<_> = (0..50)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Intention::Stop
                } else {
                    Intention::Pass
                };
                let accel = if label == Intention::Stop { -3.0 } else { 1.0 };
                (ev([i as f64 * 0.1, 2.0, 0.0, 10.0, accel]), label)
            })
            .collect();
        let m = fit_bn(&data, 2, 1e-9).unwrap();
        let stop_row = m.cpt_de(1, Intention::Stop);
        let pass_row = m.cpt_de(1, Intention::Pass);
        assert!(stop_row[0] > 1.0 - 1e-8 && pass_row[1] > 1.0 - 1e-8);
    }

    fn enumerate_posterior(m: &BnModel, e: &IntentionEvidence) -> [f64; 2] {
        // Joint table over INT and every evidence bin, then condition on the
        // observed bins by summation.
        let b = discretize(e, m).unwrap();
        let mut num = [0.0; 2];
        for l in 0..2 {
            for b3 in 0..m.bins(3) {
                for b4 in 0..m.bins(4) {
                    let cell = m.cell_index(&[b[0], b[1], b[2], 0, 0]);
                    let joint =
                        m.cpt_intention()[cell][l] * m.cpt_de[0][l][b3] * m.cpt_de[1][l][b4];
                    if b3 == b[3] && b4 == b[4] {
                        num[l] += joint;
                    }
                }
            }
        }
        let z = num[0] + num[1];
        [num[0] / z, num[1] / z]
    }

    #[test]
    fn inference_examples() {
        let uniform_de = [
            [vec![0.5, 0.5], vec![0.5, 0.5]],
            [vec![0.5, 0.5], vec![0.5, 0.5]],
        ];
        let cpt: Vec<[f64; 2]> = (0..8)
            .map(|i| [0.1 + 0.1 * i as f64, 0.9 - 0.1 * i as f64])
            .collect();
        let m = two_bin_model([0.5; 5], cpt.clone(), uniform_de.clone());
        let e = ev([1.0, 0.0, 1.0, 0.0, 1.0]);
        let post = infer_intention(&m, &e).unwrap();
        let prior = cpt[m.cell_index(&discretize(&e, &m).unwrap())];
        assert!((post.p_pass - prior[0]).abs() < 1e-12);

        let m = two_bin_model(
            [0.5; 5],
            vec![[0.5, 0.5]; 8],
            [
                [vec![0.3, 0.7], vec![0.3, 0.7]],
                [vec![0.6, 0.4], vec![0.6, 0.4]],
            ],
        );
        let post = infer_intention(&m, &e).unwrap();
        assert_eq!((post.p_pass, post.p_stop), (0.5, 0.5));
        assert_eq!(post.argmax(), Intention::Stop);

        let m = two_bin_model(
            [0.5; 5],
            cpt,
            [
                [vec![0.2, 0.8], vec![0.7, 0.3]],
                [vec![0.9, 0.1], vec![0.25, 0.75]],
            ],
        );
        for bits in 0..32u32 {
            let e = ev(std::array::from_fn(|k| ((bits >> k) & 1) as f64));
            let post = infer_intention(&m, &e).unwrap();
            let want = enumerate_posterior(&m, &e);
            assert!((post.p_pass - want[0]).abs() < 1e-12 && (post.p_stop - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn labeling_rule() {
        let e = env();
        let at = |x: f64| {
            let pts = (0..41)
                .map(|i| TrajectoryPoint::longitudinal(i as f64 * 0.1, x, 0.0, 0.0))
                .collect();
            Trajectory::new(pts, 0.1).unwrap()
        };
        assert_eq!(
            label_trajectory(&at(105.0), &e, 3.0).unwrap(),
            Intention::Pass
        );
        assert_eq!(
            label_trajectory(&at(70.0), &e, 3.0).unwrap(),
            Intention::Stop
        );
        assert_eq!(
            label_trajectory(&at(97.0), &e, 3.0).unwrap(),
            Intention::Pass
        );
        let short = at(70.0).slice(0, 20).unwrap();
        assert!(matches!(
            label_trajectory(&short, &e, 3.0),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn naive_examples() {
        let mut e = env();
        e.yellow_duration = 2.0;
        e.v_lim = 20.0;
        let p = |v: f64| TrajectoryPoint::longitudinal(0.0, 80.0, v, 0.0);
        assert_eq!(naive_intention(&p(15.0), &e, 0.0).unwrap(), Intention::Pass);
        assert_eq!(naive_intention(&p(5.0), &e, 0.0).unwrap(), Intention::Stop);

        e.a_max_naive = 2.0;
        e.v_lim = 12.0;
        let q = TrajectoryPoint::longitudinal(0.0, 77.0, 10.0, 0.0);
        assert!((max_travel(10.0, 2.0, 12.0, 2.0) - 23.0).abs() < 1e-12);
        assert_eq!(naive_intention(&q, &e, 0.0).unwrap(), Intention::Pass);

        assert!(matches!(
            naive_intention(&p(5.0), &e, 2.5),
            Err(Error::Phase(_))
        ));
        assert!(matches!(
            naive_intention(&p(5.0), &e, -0.5),
            Err(Error::Phase(_))
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let data = forty();
        let a = serde_json::to_string(&fit_bn(&data, 3, 1.0).unwrap()).unwrap();
        let b = serde_json::to_string(&fit_bn(&data, 3, 1.0).unwrap()).unwrap();
        assert_eq!(a, b);
        let back: BnModel = serde_json::from_str(&a).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), a);
    }

    fn arb_row(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    prop_compose! {
        fn arb_model()(k in prop::array::uniform5(1usize..=3))
            (cpt in prop::collection::vec(arb_row(2), k[0] * k[1] * k[2]),
             de0 in (arb_row(k[3]), arb_row(k[3])),
             de1 in (arb_row(k[4]), arb_row(k[4])),
             k in Just(k)) -> BnModel {
            let edges = k.map(|n| (1..n).map(|i| i as f64).collect::<Vec<_>>());
            let cpt = cpt.into_iter().map(|r| [r[0], r[1]]).collect();
            BnModel::from_tables(3, 1.0, edges, cpt, [[de0.0, de0.1], [de1.0, de1.1]]).unwrap()
        }
    }

    proptest! {
        #[test]
        fn posterior_normalized_and_matches_enumeration(
            m in arb_model(),
            vals in prop::array::uniform5(-1.0f64..4.0),
        ) {
            let e = ev(vals);
            let post = infer_intention(&m, &e).unwrap();
            prop_assert!((post.p_pass + post.p_stop - 1.0).abs() <= 1e-12);
            let want = enumerate_posterior(&m, &e);
            prop_assert!((post.p_pass - want[0]).abs() <= 1e-12);
        }

        #[test]
        fn stronger_pass_likelihood_never_lowers_p_pass(
            m in arb_model(),
            vals in prop::array::uniform5(-1.0f64..4.0),
            boost in 1.0f64..10.0,
        ) {
            let e = ev(vals);
            let before = infer_intention(&m, &e).unwrap().p_pass;
            let b = discretize(&e, &m).unwrap();
            let mut boosted = m.clone();
            boosted.cpt_de[0][0][b[3]] *= boost;
            let after = infer_intention(&boosted, &e).unwrap().p_pass;
            prop_assert!(after >= before - 1e-15);
        }
    }
}
