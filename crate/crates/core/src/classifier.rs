//! Linear multiclass probabilistic classifier.
//!
//! Multinomial logistic regression trained by full-batch gradient descent
//! with Armijo backtracking, starting from all-zero weights. The objective
//! is mean cross-entropy plus `(λ/2)·‖W‖²`; biases are not penalized.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub reg_lambda: f64,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            reg_lambda: 1e-3,
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

/// Dense labelled examples, row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(dim: usize) -> Self {
        TrainingSet {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], label: usize) {
        assert_eq!(x.len(), self.dim, "feature dimension");
        self.features.extend_from_slice(x);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Class-score parameters: `scores = W x + b`, `W` row-major `n_classes × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    pub n_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LinearParams {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * dim],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn axpy(&self, step: f64, dir: &LinearParams) -> LinearParams {
        let mut out = self.clone();
        for (w, g) in out.weights.iter_mut().zip(&dir.weights) {
            *w -= step * g;
        }
        for (b, g) in out.bias.iter_mut().zip(&dir.bias) {
            *b -= step * g;
        }
        out
    }

    fn norm_sq(&self) -> f64 {
        self.weights.iter().chain(&self.bias).map(|v| v * v).sum()
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

/// Examples with only their nonzero features kept.
struct SparseSet {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    labels: Vec<usize>,
}

impl SparseSet {
    fn from_dense(data: &TrainingSet, standardization: Option<&Standardization>) -> Self {
        let mut set = SparseSet {
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            labels: data.labels.clone(),
        };
        for i in 0..data.len() {
            for (j, &v) in data.row(i).iter().enumerate() {
                let v = standardization.map_or(v, |s| (v - s.mean[j]) / s.scale[j]);
                if v != 0.0 {
                    set.cols.push(j);
                    set.vals.push(v);
                }
            }
            set.row_ptr.push(set.cols.len());
        }
        set
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }
}

fn objective(
    params: &LinearParams,
    reg_lambda: f64,
    data: &SparseSet,
    mut grad: Option<&mut LinearParams>,
) -> f64 {
    let (c, d) = (params.n_classes, params.dim);
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut scores = vec![0.0; c];
    if let Some(g) = grad.as_deref_mut() {
        g.weights.fill(0.0);
        g.bias.fill(0.0);
    }
    for i in 0..data.len() {
        scores.copy_from_slice(&params.bias);
        for (j, v) in data.row(i) {
            for (k, s) in scores.iter_mut().enumerate() {
                *s += params.weights[k * d + j] * v;
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            z += *s;
        }
        let y = data.labels[i];
        loss += z.ln() - (scores[y].ln());
        if let Some(g) = grad.as_deref_mut() {
            for (k, s) in scores.iter_mut().enumerate() {
                *s /= z;
                if k == y {
                    *s -= 1.0;
                }
                g.bias[k] += *s;
            }
            for (j, v) in data.row(i) {
                for (k, s) in scores.iter().enumerate() {
                    g.weights[k * d + j] += s * v;
                }
            }
        }
    }
    let penalty: f64 = params.weights.iter().map(|w| w * w).sum();
    if let Some(g) = grad {
        for (gw, w) in g.weights.iter_mut().zip(&params.weights) {
            *gw = *gw / n + reg_lambda * w;
        }
        for gb in g.bias.iter_mut() {
            *gb /= n;
        }
    }
    loss / n + 0.5 * reg_lambda * penalty
}

/// Regularized mean cross-entropy and its exact gradient, on features as
/// given (no standardization).
pub fn loss_and_gradient(
    params: &LinearParams,
    reg_lambda: f64,
    data: &TrainingSet,
) -> Result<(f64, LinearParams)> {
    check_data(params.n_classes, data)?;
    if data.dim != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            got: data.dim,
        });
    }
    let sparse = SparseSet::from_dense(data, None);
    let mut grad = LinearParams::zeros(params.n_classes, params.dim);
    let loss = objective(params, reg_lambda, &sparse, Some(&mut grad));
    Ok((loss, grad))
}

fn check_data(n_classes: usize, data: &TrainingSet) -> Result<()> {
    if data.is_empty() {
        return Err(Error::NoExamples);
    }
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

/// Per-feature affine map `(x - mean) / scale` fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Standardization {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Fits mean and standard deviation for `columns`; other features pass
    /// through unchanged. Constant columns keep scale 1.
    pub fn fit(data: &TrainingSet, columns: &[usize]) -> Self {
        let mut s = Self::identity(data.dim);
        let n = data.len() as f64;
        for &j in columns {
            let mean = (0..data.len()).map(|i| data.row(i)[j]).sum::<f64>() / n;
            let var = (0..data.len())
                .map(|i| (data.row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            s.mean[j] = mean;
            s.scale[j] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        s
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainMeta {
    pub n_train: usize,
    pub iterations: usize,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    /// Parameters acting on standardized features.
    pub params: LinearParams,
    pub reg_lambda: f64,
    pub standardization: Standardization,
    pub train_meta: TrainMeta,
}

impl ModelWeights {
    pub fn n_classes(&self) -> usize {
        self.params.n_classes
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.params.scores(&self.standardization.apply(x)))
    }

    /// Softmax class probabilities for a raw feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(x)?))
    }

    pub fn is_finite(&self) -> bool {
        self.params.weights.iter().chain(&self.params.bias).all(|v| v.is_finite())
            && self.standardization.scale.iter().all(|s| *s > 0.0 && s.is_finite())
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e6;

/// Fits a model. `continuous` lists the feature columns to standardize.
pub fn train(
    data: &TrainingSet,
    n_classes: usize,
    continuous: &[usize],
    config: &TrainConfig,
) -> Result<ModelWeights> {
    check_data(n_classes, data)?;
    let mut seen = vec![false; n_classes];
    data.labels.iter().for_each(|&y| seen[y] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::SingleClass);
    }
    if !(config.reg_lambda >= 0.0) || !config.tol.is_finite() {
        return Err(Error::InvalidConfig("reg_lambda and tol must be finite, λ ≥ 0".into()));
    }

    let standardization = Standardization::fit(data, continuous);
    let sparse = SparseSet::from_dense(data, Some(&standardization));
    let lambda = config.reg_lambda;

    let mut params = LinearParams::zeros(n_classes, data.dim);
    let mut grad = LinearParams::zeros(n_classes, data.dim);
    let mut cand_grad = grad.clone();
    let mut loss = objective(&params, lambda, &sparse, Some(&mut grad));
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }

    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let g2 = grad.norm_sq();
        if g2 == 0.0 {
            break;
        }
        let accepted = loop {
            let candidate = params.axpy(step, &grad);
            let cand_loss = objective(&candidate, lambda, &sparse, Some(&mut cand_grad));
            if cand_loss.is_finite() && cand_loss <= loss - ARMIJO_C * step * g2 {
                break Some((candidate, cand_loss));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((candidate, cand_loss)) = accepted else {
            break;
        };
        iterations += 1;
        let decrease = loss - cand_loss;
        params = candidate;
        loss = cand_loss;
        std::mem::swap(&mut grad, &mut cand_grad);
        step = (step * 2.0).min(MAX_STEP);
        if decrease < config.tol {
            break;
        }
    }

    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(ModelWeights {
        params,
        reg_lambda: lambda,
        standardization,
        train_meta: TrainMeta {
            n_train: data.len(),
            iterations,
            final_loss: loss,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&[f64], usize)]) -> TrainingSet {
        let mut s = TrainingSet::new(rows[0].0.len());
        for (x, y) in rows {
            s.push(x, *y);
        }
        s
    }

    fn accuracy(model: &ModelWeights, data: &TrainingSet) -> f64 {
        let hits = (0..data.len())
            .filter(|&i| {
                let p = model.predict_proba(data.row(i)).unwrap();
                let best = p
                    .iter()
                    .enumerate()
                    .fold(0, |b, (k, v)| if *v > p[b] { k } else { b });
                best == data.labels[i]
            })
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn separable_two_classes() {
        let data = set(&[
            (&[1.0, 2.0], 0),
            (&[2.0, 1.5], 0),
            (&[1.5, 3.0], 0),
            (&[-1.0, -2.0], 1),
            (&[-2.0, -0.5], 1),
            (&[-0.5, -3.0], 1),
        ]);
        let m = train(&data, 2, &[], &TrainConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &data), 1.0);
        assert!(m.is_finite());
    }

    #[test]
    fn heavy_regularization_shrinks_weights() {
        let data = set(&[
            (&[1.0, 0.0], 0),
            (&[0.0, 1.0], 0),
            (&[1.0, 1.0], 0),
            (&[-1.0, 0.0], 1),
        ]);
        let cfg = TrainConfig {
            reg_lambda: 1e6,
            ..TrainConfig::default()
        };
        let m = train(&data, 2, &[], &cfg).unwrap();
        assert!(m.params.weights.iter().all(|w| w.abs() < 1e-5));
    }

    #[test]
    fn bias_only_fit_recovers_prior() {
        let data = set(&[(&[0.0], 0), (&[0.0], 0), (&[0.0], 0), (&[0.0], 1)]);
        let cfg = TrainConfig {
            max_iters: 5000,
            tol: 1e-14,
            ..TrainConfig::default()
        };
        let m = train(&data, 2, &[], &cfg).unwrap();
        let p = m.predict_proba(&[0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-5, "{p:?}");
    }

    #[test]
    fn uniform_at_zero_weights() {
        let params = LinearParams::zeros(4, 3);
        let p = softmax(&params.scores(&[1.0, 2.0, 3.0]));
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let shifted = softmax(&[1.0 + 7.0, 2.0 + 7.0, 0.5 + 7.0]);
        let base = softmax(&[1.0, 2.0, 0.5]);
        for (a, b) in shifted.iter().zip(&base) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(softmax(&[3.0, 3.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_weight_loss_is_ln2() {
        let data = set(&[(&[1.0], 0), (&[2.0], 1), (&[-1.0], 0), (&[0.5], 1)]);
        let (loss, _) = loss_and_gradient(&LinearParams::zeros(2, 1), 0.1, &data).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_data_same_gradient() {
        let data = set(&[(&[1.0, -0.5], 0), (&[2.0, 0.3], 1), (&[-1.0, 0.7], 2)]);
        let mut doubled = data.clone();
        for i in 0..data.len() {
            doubled.push(data.row(i), data.labels[i]);
        }
        let mut p = LinearParams::zeros(3, 2);
        p.weights = vec![0.1, -0.2, 0.3, 0.05, -0.4, 0.2];
        p.bias = vec![0.1, 0.0, -0.1];
        let (l1, g1) = loss_and_gradient(&p, 0.01, &data).unwrap();
        let (l2, g2) = loss_and_gradient(&p, 0.01, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.weights.iter().chain(&g1.bias).zip(g2.weights.iter().chain(&g2.bias)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn error_paths() {
        let one = set(&[(&[1.0], 0), (&[2.0], 0)]);
        assert!(matches!(train(&one, 2, &[], &TrainConfig::default()), Err(Error::SingleClass)));
        let empty = TrainingSet::new(2);
        assert!(matches!(train(&empty, 2, &[], &TrainConfig::default()), Err(Error::NoExamples)));
        let data = set(&[(&[1.0], 0), (&[2.0], 1)]);
        let m = train(&data, 2, &[], &TrainConfig::default()).unwrap();
        assert!(matches!(m.predict_proba(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unseen_class_keeps_a_row() {
        let data = set(&[(&[1.0], 0), (&[-1.0], 1), (&[1.2], 0)]);
        let m = train(&data, 3, &[], &TrainConfig::default()).unwrap();
        let p = m.predict_proba(&[1.0]).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p[2] > 0.0 && p[2] < p[0]);
    }
}
