#![allow(dead_code)]

use std::f64::consts::TAU;

use callpred::behavior::FilteredEgo;
use callpred::calldata::{CallEvent, Direction, EgoLog, Timestamp};
use callpred::classifier::{LinearParams, TrainingSet};
use callpred::model::EgoModel;
use chrono::{DateTime, Datelike, FixedOffset, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Composite Simpson's rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn random_training_set(rng: &mut ChaCha8Rng, n_classes: usize, dim: usize, n: usize) -> TrainingSet {
    let mut data = TrainingSet::new(dim);
    for i in 0..n {
        let x: Vec<f64> = (0..dim)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) })
            .collect();
        // Every class appears at least once.
        let y = if i < n_classes { i } else { rng.random_range(0..n_classes) };
        data.push(&x, y);
    }
    data
}

pub fn random_params(rng: &mut ChaCha8Rng, n_classes: usize, dim: usize) -> LinearParams {
    let mut p = LinearParams::zeros(n_classes, dim);
    p.weights.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
    p.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    p
}

/// Mean cross-entropy plus (λ/2)‖W‖², written out directly.
pub fn naive_loss(p: &LinearParams, lambda: f64, data: &TrainingSet) -> f64 {
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let scores: Vec<f64> = (0..p.n_classes)
            .map(|c| p.bias[c] + (0..p.dim).map(|j| p.weights[c * p.dim + j] * x[j]).sum::<f64>())
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        total += lse - scores[data.labels[i]];
    }
    total / data.len() as f64 + 0.5 * lambda * p.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Central-difference gradient of `naive_loss`, weights then biases.
pub fn numeric_gradient(p: &LinearParams, lambda: f64, data: &TrainingSet, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let n_w = p.weights.len();
    for idx in 0..n_w + p.bias.len() {
        let bump = |delta: f64| {
            let mut q = p.clone();
            if idx < n_w {
                q.weights[idx] += delta;
            } else {
                q.bias[idx - n_w] += delta;
            }
            naive_loss(&q, lambda, data)
        };
        out.push((bump(h) - bump(-h)) / (2.0 * h));
    }
    out
}

/// A small random ego: at most four frequent alters plus a rare one, mixed
/// directions, clustered around a few hours of the day.
pub fn small_ego(seed: u64) -> EgoLog {
    let mut r = rng(seed);
    let n = r.random_range(60..=140);
    let alters = ["amy", "bob", "cat", "dan"];
    let n_alters = r.random_range(2..=4);
    let start: Timestamp = 1_429_401_600 + r.random_range(0..86_400);
    let mut t = start;
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        t += r.random_range(600..40_000);
        let alter = if i % 29 == 7 {
            "zed"
        } else {
            alters[r.random_range(0..n_alters)]
        };
        let direction = match r.random_range(0..10) {
            0..=5 => Direction::Outgoing,
            6..=8 => Direction::Incoming,
            _ => Direction::Missed,
        };
        events.push(CallEvent::new("ego", alter, t, direction));
        // Occasional same-second duplicate to exercise tie handling.
        if r.random_bool(0.05) {
            events.push(CallEvent::new("ego", alters[0], t, Direction::Outgoing));
        }
    }
    EgoLog::new("ego", events, None).unwrap()
}

/// Feature vector built from calendar fields computed by chrono.
pub fn naive_features(ego: &FilteredEgo, offset: i32, events: &[CallEvent], t: Timestamp) -> Vec<f64> {
    let c = ego.class_set.len();
    let mut x = vec![0.0; 16 + 2 * c];
    let local = DateTime::from_timestamp(t, 0)
        .unwrap()
        .with_timezone(&FixedOffset::east_opt(offset).unwrap());
    let minute = local.hour() * 60 + local.minute();
    let phase = TAU * f64::from(minute) / 1440.0;
    x[0] = phase.sin();
    x[1] = phase.cos();
    x[2 + local.weekday().num_days_from_sunday() as usize] = 1.0;
    if local.hour() < 7 || local.hour() >= 20 {
        x[9] = 1.0;
    }
    let past: Vec<&CallEvent> = events.iter().filter(|e| e.timestamp < t).collect();
    if past.is_empty() {
        x[15 + 2 * c] = 1.0;
        return x;
    }
    let class = |a: &str| ego.class_set.iter().position(|s| s == a);
    let last = past[past.len() - 1];
    if let Some(k) = class(&last.alter_id) {
        x[10 + k] = 1.0;
    }
    if past.len() >= 2 {
        if let Some(k) = class(&past[past.len() - 2].alter_id) {
            x[10 + c + k] = 1.0;
        }
    }
    let d = match last.direction {
        Direction::Incoming => 0,
        Direction::Outgoing => 1,
        Direction::Missed => 2,
    };
    x[10 + 2 * c + d] = 1.0;
    x[13 + 2 * c] = ((t - last.timestamp) as f64 / 60.0).ln_1p();
    if let Some(o) = past.iter().rev().find(|e| e.direction == Direction::Outgoing) {
        x[14 + 2 * c] = ((t - o.timestamp) as f64 / 60.0).ln_1p();
    }
    x
}

/// Top-`k` class ids by repeated arg-max, lowest index winning ties.
pub fn naive_top_k(probs: &[f64], class_set: &[String], k: usize) -> Vec<String> {
    let mut taken = vec![false; probs.len()];
    let mut out = Vec::new();
    for _ in 0..k.min(probs.len()) {
        let mut best: Option<usize> = None;
        for c in 0..probs.len() {
            if !taken[c] && best.is_none_or(|b| probs[c] > probs[b]) {
                best = Some(c);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(class_set[b].clone());
    }
    out
}

pub fn naive_last_k(events: &[CallEvent], t: Timestamp, k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in events.iter().filter(|e| e.timestamp < t).rev() {
        if out.len() < k && !out.iter().any(|a| a == &e.alter_id) {
            out.push(e.alter_id.clone());
        }
    }
    out
}

/// Alters by outgoing training calls; classes first on ties, in class order,
/// then other alters by id.
pub fn naive_top_frequent(ego: &FilteredEgo, k: usize) -> Vec<String> {
    let mut alters: Vec<String> = ego.class_set.clone();
    for e in ego.train_events() {
        if e.direction == Direction::Outgoing && !alters.contains(&e.alter_id) {
            alters.push(e.alter_id.clone());
        }
    }
    let count = |a: &str| {
        ego.train_events()
            .iter()
            .filter(|e| e.direction == Direction::Outgoing && e.alter_id == a)
            .count()
    };
    let key = |a: &String| {
        let pos = ego.class_set.iter().position(|c| c == a).unwrap_or(usize::MAX);
        (std::cmp::Reverse(count(a)), pos, a.clone())
    };
    alters.sort_by_key(key);
    alters.truncate(k);
    alters
}

pub fn naive_probs(model: &EgoModel, x: &[f64]) -> Vec<f64> {
    model.weights.predict_proba(x).unwrap()
}

pub struct OracleOutcome {
    pub n_classes: usize,
    pub n_test_calls: usize,
    pub comparisons: usize,
    pub mismatches: Vec<String>,
}

/// Recomputes every list, both baselines and the ε metric for one small ego
/// by direct scanning and compares with the evaluation pipeline.
pub fn oracle_check(seed: u64) -> OracleOutcome {
    use callpred::behavior::EgoModelConfig;
    use callpred::calldata::TimeZone;
    use callpred::classifier::TrainConfig;
    use callpred::evaluation::{
        baseline_last_k, baseline_top_frequent, evaluate_model, topk_recommend, EvalConfig, Method,
    };

    let offset = [0, 3_600, -18_000, 19_800][(seed % 4) as usize];
    let tz = TimeZone::from_offset_secs(offset).unwrap();
    let ego = (0..)
        .map(|i| FilteredEgo::prepare(&small_ego(seed * 1_000 + i), &EgoModelConfig::default()).unwrap())
        .find(|e| e.is_eligible())
        .unwrap();
    let model = EgoModel::fit(&ego, tz, &TrainConfig::default()).unwrap();
    let config = EvalConfig::default();
    let eval = evaluate_model(&ego, &model, &config).unwrap();

    let c = ego.class_set.len();
    let mut mismatches = Vec::new();
    let mut comparisons = 0;
    let mut check = |ok: bool, what: String| {
        comparisons += 1;
        if !ok {
            mismatches.push(what);
        }
    };

    let calls: Vec<&CallEvent> = ego
        .events
        .iter()
        .skip(ego.n_train)
        .filter(|e| e.direction == Direction::Outgoing && ego.class_set.contains(&e.alter_id))
        .collect();
    let n = calls.len();
    let ks = &config.ks;
    let mut hits = vec![[0usize; 3]; ks.len()];
    for call in &calls {
        let t = call.timestamp;
        let x = naive_features(&ego, offset, &ego.events, t);
        check(x == model.encoder().encode(&ego.events, t), format!("features at {t}"));
        let probs = naive_probs(&model, &x);
        for (ki, &k) in ks.iter().enumerate() {
            let rec = naive_top_k(&probs, &ego.class_set, k);
            let last = naive_last_k(&ego.events, t, k);
            let freq = naive_top_frequent(&ego, k);
            check(
                rec == topk_recommend(&model, &ego.events, t, k).unwrap().entries,
                format!("top-{k} list at {t}"),
            );
            check(last == baseline_last_k(&ego.events, t, k), format!("last-{k} at {t}"));
            check(
                freq == baseline_top_frequent(ego.train_events(), &ego.class_set, k),
                format!("frequent-{k}"),
            );
            for (m, list) in [&rec, &freq, &last].into_iter().enumerate() {
                if list.contains(&call.alter_id) {
                    hits[ki][m] += 1;
                }
            }
        }
    }
    for (ki, &k) in ks.iter().enumerate() {
        for (m, method) in [Method::TopKRec, Method::TopKFrequent, Method::LastK].into_iter().enumerate() {
            let naive = hits[ki][m] as f64 / n as f64;
            check(
                eval.accuracy(method, k) == Some(naive),
                format!("{} accuracy at k={k}", method.as_str()),
            );
        }
    }

    let step = config.grid_step;
    let test = ego.test_events();
    let first = test.first().unwrap().timestamp;
    let last = test.last().unwrap().timestamp;
    let mut grid = Vec::new();
    let mut g = first - first.rem_euclid(step);
    while g < last + step {
        grid.push(g);
        if g >= last {
            break;
        }
        g += step;
    }
    let lists: Vec<Vec<String>> = grid
        .iter()
        .map(|&g| {
            let x = naive_features(&ego, offset, &ego.events, g);
            naive_top_k(&naive_probs(&model, &x), &ego.class_set, c)
        })
        .collect();
    for &k in ks {
        for &eps in &config.epsilons {
            let found = calls
                .iter()
                .filter(|call| {
                    grid.iter().zip(&lists).any(|(&g, list)| {
                        (g - call.timestamp).abs() <= eps
                            && list.iter().take(k).any(|a| a == &call.alter_id)
                    })
                })
                .count();
            let naive = found as f64 / n as f64;
            check(
                eval.epsilon_proportion(k, eps) == Some(naive),
                format!("epsilon {eps}s at k={k}"),
            );
        }
    }
    OracleOutcome {
        n_classes: c,
        n_test_calls: n,
        comparisons,
        mismatches,
    }
}
