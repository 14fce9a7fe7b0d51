//! Top-k recommendation accuracy against the last-k and top-k-frequent
//! baselines, and the ε time-deviation metric.
//!
//! Accuracies are computed over an ego's outgoing test calls whose callee is
//! in the class set. Each query at time `t` sees every actual event strictly
//! before `t` as history; model weights stay frozen after training.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::behavior::{EgoModelConfig, FilteredEgo};
use crate::calldata::{CallEvent, Dataset, EgoLog, TimeZone, Timestamp};
use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::model::EgoModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TopKRec,
    TopKFrequent,
    LastK,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::TopKFrequent, Method::LastK, Method::TopKRec];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TopKRec => "topk_recommendations",
            Method::TopKFrequent => "topk_called_numbers",
            Method::LastK => "lastk_numbers",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecommendationList {
    pub query_time: Timestamp,
    pub entries: Vec<String>,
}

/// Events strictly before `t` in a time-ordered slice.
pub fn history_before(events: &[CallEvent], t: Timestamp) -> &[CallEvent] {
    &events[..events.partition_point(|e| e.timestamp < t)]
}

/// Class indices by descending probability; ties keep class order.
pub fn rank_classes(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(Ordering::Equal));
    order
}

pub fn topk_recommend(
    model: &EgoModel,
    history: &[CallEvent],
    t: Timestamp,
    k: usize,
) -> Result<RecommendationList> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let probs = model.predict_proba(history, t)?;
    Ok(RecommendationList {
        query_time: t,
        entries: rank_classes(&probs)
            .into_iter()
            .take(k)
            .map(|c| model.class_set[c].clone())
            .collect(),
    })
}

/// The `k` most recently contacted distinct alters before `t`, newest first.
pub fn baseline_last_k(history: &[CallEvent], t: Timestamp, k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in history_before(history, t).iter().rev() {
        if out.len() == k {
            break;
        }
        if !out.contains(&e.alter_id) {
            out.push(e.alter_id.clone());
        }
    }
    out
}

/// Alters ranked by outgoing calls in `train_events`. Every class appears
/// (possibly with zero calls); ties go to the earlier class, and alters
/// outside the class set follow classes at equal count, by id.
pub fn frequency_ranking(train_events: &[CallEvent], class_set: &[String]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = class_set.iter().map(|c| (c.as_str(), 0)).collect();
    for e in train_events.iter().filter(|e| e.is_outgoing()) {
        *counts.entry(e.alter_id.as_str()).or_insert(0) += 1;
    }
    let class_pos = |a: &str| class_set.iter().position(|c| c == a).unwrap_or(usize::MAX);
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| class_pos(a.0).cmp(&class_pos(b.0)))
            .then_with(|| a.0.cmp(b.0))
    });
    ranked.into_iter().map(|(a, _)| a.to_string()).collect()
}

pub fn baseline_top_frequent(
    train_events: &[CallEvent],
    class_set: &[String],
    k: usize,
) -> Vec<String> {
    let mut ranking = frequency_ranking(train_events, class_set);
    ranking.truncate(k);
    ranking
}

/// Position of `target` in a list, or `usize::MAX` when absent.
fn position_of(list: &[String], target: &str) -> usize {
    list.iter().position(|a| a == target).unwrap_or(usize::MAX)
}

/// Zero-based list position of the true callee for every in-class outgoing
/// test call (`usize::MAX` when never listed). Accuracy at `k` is the
/// fraction of positions below `k`.
pub fn callee_positions(ego: &FilteredEgo, model: &EgoModel, method: Method) -> Result<Vec<usize>> {
    let frequent = frequency_ranking(ego.train_events(), &ego.class_set);
    let mut positions = Vec::new();
    for (i, call) in ego.in_class_test_calls() {
        let history = history_before(&ego.events[..i], call.timestamp);
        let pos = match method {
            Method::TopKRec => {
                let probs = model.predict_proba(history, call.timestamp)?;
                let target = model
                    .encoder()
                    .class_of(&call.alter_id)
                    .expect("in-class call");
                rank_classes(&probs)
                    .iter()
                    .position(|&c| c == target)
                    .expect("every class is ranked")
            }
            Method::TopKFrequent => position_of(&frequent, &call.alter_id),
            Method::LastK => {
                let recent = baseline_last_k(history, call.timestamp, usize::MAX);
                position_of(&recent, &call.alter_id)
            }
        };
        positions.push(pos);
    }
    if positions.is_empty() {
        return Err(Error::NoTestCalls);
    }
    Ok(positions)
}

fn fraction_below(positions: &[usize], k: usize) -> f64 {
    positions.iter().filter(|&&p| p < k).count() as f64 / positions.len() as f64
}

/// Fraction of in-class outgoing test calls whose callee is in the method's
/// length-`k` list at the call's timestamp.
pub fn topk_accuracy(ego: &FilteredEgo, model: &EgoModel, method: Method, k: usize) -> Result<f64> {
    Ok(fraction_below(&callee_positions(ego, model, method)?, k))
}

/// Query instants for the ε metric: multiples of `step` from the one at or
/// before the first test event through the one at or after the last.
pub fn epsilon_grid(ego: &FilteredEgo, step: i64) -> Vec<Timestamp> {
    let test = ego.test_events();
    let (Some(first), Some(last)) = (test.first(), test.last()) else {
        return Vec::new();
    };
    let start = first.timestamp.div_euclid(step) * step;
    let end = -((-last.timestamp).div_euclid(step)) * step;
    (0..=(end - start) / step).map(|i| start + i * step).collect()
}

/// For each grid instant, the rank of every class in the model's list.
fn grid_ranks(ego: &FilteredEgo, model: &EgoModel, grid: &[Timestamp]) -> Result<Vec<Vec<usize>>> {
    let enc = model.encoder();
    let mut x = vec![0.0; enc.dim()];
    grid.iter()
        .map(|&g| {
            enc.encode_into(history_before(&ego.events, g), g, &mut x);
            let order = rank_classes(&model.weights.predict_proba(&x)?);
            let mut rank = vec![0; order.len()];
            for (pos, c) in order.into_iter().enumerate() {
                rank[c] = pos;
            }
            Ok(rank)
        })
        .collect()
}

/// For every in-class test call and each ε, the best rank its callee reaches
/// on any grid instant within ε of the call.
fn best_grid_ranks(
    ego: &FilteredEgo,
    model: &EgoModel,
    epsilons: &[i64],
    grid_step: i64,
) -> Result<Vec<Vec<usize>>> {
    if grid_step <= 0 {
        return Err(Error::InvalidConfig("grid step must be positive".into()));
    }
    if let Some(e) = epsilons.iter().find(|&&e| e < grid_step) {
        return Err(Error::InvalidConfig(format!(
            "epsilon {e}s is smaller than the grid step {grid_step}s"
        )));
    }
    let calls: Vec<&CallEvent> = ego.in_class_test_calls().map(|(_, e)| e).collect();
    if calls.is_empty() {
        return Err(Error::NoTestCalls);
    }
    let grid = epsilon_grid(ego, grid_step);
    let ranks = grid_ranks(ego, model, &grid)?;
    let enc = model.encoder();
    Ok(calls
        .iter()
        .map(|call| {
            let c = enc.class_of(&call.alter_id).expect("in-class call");
            epsilons
                .iter()
                .map(|&eps| {
                    let lo = grid.partition_point(|&g| g < call.timestamp - eps);
                    let hi = grid.partition_point(|&g| g <= call.timestamp + eps);
                    ranks[lo..hi].iter().map(|r| r[c]).min().unwrap_or(usize::MAX)
                })
                .collect()
        })
        .collect())
}

/// Fraction of in-class outgoing test calls to callee `c` at `t` for which
/// some grid instant within `epsilon` seconds of `t` lists `c` in its top `k`.
pub fn epsilon_accuracy(
    ego: &FilteredEgo,
    model: &EgoModel,
    k: usize,
    epsilon: i64,
    grid_step: i64,
) -> Result<f64> {
    let best = best_grid_ranks(ego, model, &[epsilon], grid_step)?;
    Ok(best.iter().filter(|r| r[0] < k).count() as f64 / best.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub model: EgoModelConfig,
    pub train: TrainConfig,
    pub ks: Vec<usize>,
    /// Deviation thresholds in seconds.
    pub epsilons: Vec<i64>,
    pub grid_step: i64,
}

pub const DEFAULT_EPSILONS: [i64; 4] = [15 * 60, 3_600, 10 * 3_600, 24 * 3_600];
pub const DEFAULT_GRID_STEP: i64 = 15 * 60;

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: EgoModelConfig::default(),
            train: TrainConfig::default(),
            ks: (1..=15).collect(),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidConfig("k values must be at least 1".into()));
        }
        if self.grid_step <= 0 {
            return Err(Error::InvalidConfig("grid step must be positive".into()));
        }
        if self.epsilons.iter().any(|&e| e < self.grid_step) {
            return Err(Error::InvalidConfig("every epsilon must be at least the grid step".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodAccuracy {
    pub method: Method,
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonAccuracy {
    pub k: usize,
    pub epsilon: i64,
    pub proportion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoEvaluation {
    pub ego_id: String,
    pub n_classes: usize,
    pub n_test_calls: usize,
    pub n_out_of_class: usize,
    pub train_iterations: usize,
    pub methods: Vec<MethodAccuracy>,
    pub epsilon: Vec<EpsilonAccuracy>,
}

impl EgoEvaluation {
    pub fn accuracy(&self, method: Method, k: usize) -> Option<f64> {
        self.methods
            .iter()
            .find(|m| m.method == method && m.k == k)
            .map(|m| m.accuracy)
    }

    pub fn epsilon_proportion(&self, k: usize, epsilon: i64) -> Option<f64> {
        self.epsilon
            .iter()
            .find(|e| e.k == k && e.epsilon == epsilon)
            .map(|e| e.proportion)
    }
}

/// Evaluates an already trained model on a prepared ego.
pub fn evaluate_model(ego: &FilteredEgo, model: &EgoModel, config: &EvalConfig) -> Result<EgoEvaluation> {
    let mut methods = Vec::new();
    let mut n_test_calls = 0;
    for method in Method::ALL {
        let positions = callee_positions(ego, model, method)?;
        n_test_calls = positions.len();
        for &k in &config.ks {
            methods.push(MethodAccuracy {
                method,
                k,
                accuracy: fraction_below(&positions, k),
            });
        }
    }
    let best = best_grid_ranks(ego, model, &config.epsilons, config.grid_step)?;
    let mut epsilon = Vec::new();
    for &k in &config.ks {
        for (j, &eps) in config.epsilons.iter().enumerate() {
            let hits = best.iter().filter(|r| r[j] < k).count();
            epsilon.push(EpsilonAccuracy {
                k,
                epsilon: eps,
                proportion: hits as f64 / best.len() as f64,
            });
        }
    }
    Ok(EgoEvaluation {
        ego_id: ego.ego_id.clone(),
        n_classes: ego.class_set.len(),
        n_test_calls,
        n_out_of_class: ego.out_of_class_test_calls(),
        train_iterations: model.weights.train_meta.iterations,
        methods,
        epsilon,
    })
}

/// Prepares, trains and evaluates one ego. Ineligible egos are errors.
pub fn evaluate_ego(log: &EgoLog, tz: TimeZone, config: &EvalConfig) -> Result<EgoEvaluation> {
    let ego = FilteredEgo::prepare(log, &config.model)?;
    if ego.class_set.len() < 2 {
        return Err(Error::SingleClass);
    }
    if ego.in_class_test_calls().next().is_none() {
        return Err(Error::NoTestCalls);
    }
    let model = EgoModel::fit(&ego, tz, &config.train)?;
    evaluate_model(&ego, &model, config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedEgo {
    pub ego_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub ks: Vec<usize>,
    pub epsilons: Vec<i64>,
    /// Evaluated egos in dataset order.
    pub per_ego: Vec<EgoEvaluation>,
    pub skipped: Vec<SkippedEgo>,
}

impl EvaluationReport {
    /// Unweighted mean over egos.
    pub fn mean_accuracy(&self, method: Method, k: usize) -> f64 {
        mean(self.per_ego.iter().filter_map(|e| e.accuracy(method, k)))
    }

    pub fn mean_epsilon(&self, k: usize, epsilon: i64) -> f64 {
        mean(self.per_ego.iter().filter_map(|e| e.epsilon_proportion(k, epsilon)))
    }

    pub fn total_test_calls(&self) -> usize {
        self.per_ego.iter().map(|e| e.n_test_calls).sum()
    }

    pub fn total_out_of_class(&self) -> usize {
        self.per_ego.iter().map(|e| e.n_out_of_class).sum()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn evaluate_dataset(dataset: &Dataset, config: &EvalConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let results: Vec<_> = dataset
        .egos
        .par_iter()
        .map(|log| (log.ego_id.clone(), evaluate_ego(log, dataset.timezone, config)))
        .collect();
    let mut per_ego = Vec::new();
    let mut skipped = Vec::new();
    for (ego_id, r) in results {
        match r {
            Ok(e) => per_ego.push(e),
            Err(e) => skipped.push(SkippedEgo {
                ego_id,
                reason: e.to_string(),
            }),
        }
    }
    if per_ego.is_empty() {
        return Err(Error::NoEligibleEgos);
    }
    Ok(EvaluationReport {
        ks: config.ks.clone(),
        epsilons: config.epsilons.clone(),
        per_ego,
        skipped,
    })
}
