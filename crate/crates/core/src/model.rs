//! Trained per-ego models and their on-disk format.
//!
//! Model files are UTF-8 text. Floats are written in Rust's shortest
//! round-trip notation, so save followed by load is bit-exact.
//!
//! ```text
//! callpred-model 1
//! ego <ego_id>
//! utc_offset <seconds>
//! classes <C>
//! <alter_id>            (C lines, class order)
//! dim <D>
//! reg_lambda <λ>
//! train <n_train> <iterations> <final_loss>
//! standardization
//! <mean> <scale>        (D lines)
//! weights
//! <w_1> ... <w_D>       (C lines, row-major)
//! bias
//! <b_1> ... <b_C>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::behavior::FilteredEgo;
use crate::calldata::{CallEvent, TimeZone, Timestamp};
use crate::classifier::{
    train, LinearParams, ModelWeights, Standardization, TrainConfig, TrainMeta, TrainingSet,
};
use crate::error::{Error, Result};
use crate::features::FeatureEncoder;

pub const MODEL_MAGIC: &str = "callpred-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct EgoModel {
    pub ego_id: String,
    pub class_set: Vec<String>,
    pub timezone: TimeZone,
    pub weights: ModelWeights,
    encoder: FeatureEncoder,
}

impl PartialEq for EgoModel {
    fn eq(&self, other: &Self) -> bool {
        self.ego_id == other.ego_id
            && self.class_set == other.class_set
            && self.timezone == other.timezone
            && self.weights == other.weights
    }
}

/// Training examples from the ego's outgoing in-class training calls.
/// Each call's context is every event strictly before it.
pub fn training_set(ego: &FilteredEgo, encoder: &FeatureEncoder) -> TrainingSet {
    let mut set = TrainingSet::new(encoder.dim());
    let mut x = vec![0.0; encoder.dim()];
    for (i, e) in ego.train_events().iter().enumerate() {
        if !e.is_outgoing() {
            continue;
        }
        if let Some(label) = encoder.class_of(&e.alter_id) {
            encoder.encode_into(&ego.events[..i], e.timestamp, &mut x);
            set.push(&x, label);
        }
    }
    set
}

impl EgoModel {
    pub fn from_parts(
        ego_id: String,
        class_set: Vec<String>,
        timezone: TimeZone,
        weights: ModelWeights,
    ) -> Result<Self> {
        let encoder = FeatureEncoder::new(&class_set, timezone)?;
        if weights.n_classes() != class_set.len() || weights.dim() != encoder.dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.dim(),
                got: weights.dim(),
            });
        }
        Ok(EgoModel {
            ego_id,
            class_set,
            timezone,
            weights,
            encoder,
        })
    }

    pub fn fit(ego: &FilteredEgo, timezone: TimeZone, config: &TrainConfig) -> Result<Self> {
        let encoder = FeatureEncoder::new(&ego.class_set, timezone)?;
        let data = training_set(ego, &encoder);
        let continuous = encoder.layout().continuous();
        let weights = train(&data, ego.class_set.len(), &continuous, config)?;
        Ok(EgoModel {
            ego_id: ego.ego_id.clone(),
            class_set: ego.class_set.clone(),
            timezone,
            weights,
            encoder,
        })
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    /// Class probabilities at `t` given the events before it.
    pub fn predict_proba(&self, history: &[CallEvent], t: Timestamp) -> Result<Vec<f64>> {
        self.weights.predict_proba(&self.encoder.encode(history, t))
    }

    pub fn to_text(&self) -> String {
        let w = &self.weights;
        let p = &w.params;
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(s, "ego {}", self.ego_id);
        let _ = writeln!(s, "utc_offset {}", self.timezone.offset_secs());
        let _ = writeln!(s, "classes {}", self.class_set.len());
        for a in &self.class_set {
            let _ = writeln!(s, "{a}");
        }
        let _ = writeln!(s, "dim {}", p.dim);
        let _ = writeln!(s, "reg_lambda {:?}", w.reg_lambda);
        let m = w.train_meta;
        let _ = writeln!(s, "train {} {} {:?}", m.n_train, m.iterations, m.final_loss);
        s.push_str("standardization\n");
        for (mean, scale) in w.standardization.mean.iter().zip(&w.standardization.scale) {
            let _ = writeln!(s, "{mean:?} {scale:?}");
        }
        s.push_str("weights\n");
        for row in p.weights.chunks_exact(p.dim) {
            s.push_str(&join_floats(row));
            s.push('\n');
        }
        s.push_str("bias\n");
        s.push_str(&join_floats(&p.bias));
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("missing {what}")))
        };

        let header = next("header")?;
        let version = header
            .strip_prefix(MODEL_MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::ModelFormat("not a model file".into()))?;
        if version != MODEL_VERSION.to_string() {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let ego_id = keyed(next("ego")?, "ego")?.to_string();
        let offset: i32 = parse_num(keyed(next("utc_offset")?, "utc_offset")?)?;
        let n_classes: usize = parse_num(keyed(next("classes")?, "classes")?)?;
        let mut class_set = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            class_set.push(next("class id")?.to_string());
        }
        let dim: usize = parse_num(keyed(next("dim")?, "dim")?)?;
        let reg_lambda: f64 = parse_num(keyed(next("reg_lambda")?, "reg_lambda")?)?;
        let meta = keyed(next("train")?, "train")?;
        let meta: Vec<&str> = meta.split(' ').collect();
        if meta.len() != 3 {
            return Err(Error::ModelFormat("train line needs 3 fields".into()));
        }
        let train_meta = TrainMeta {
            n_train: parse_num(meta[0])?,
            iterations: parse_num(meta[1])?,
            final_loss: parse_num(meta[2])?,
        };

        expect(next("standardization")?, "standardization")?;
        let mut standardization = Standardization {
            mean: Vec::with_capacity(dim),
            scale: Vec::with_capacity(dim),
        };
        for _ in 0..dim {
            let row = parse_floats(next("standardization row")?, 2)?;
            standardization.mean.push(row[0]);
            standardization.scale.push(row[1]);
        }
        expect(next("weights")?, "weights")?;
        let mut weights = Vec::with_capacity(n_classes * dim);
        for _ in 0..n_classes {
            weights.extend(parse_floats(next("weight row")?, dim)?);
        }
        expect(next("bias")?, "bias")?;
        let bias = parse_floats(next("bias row")?, n_classes)?;

        let model_weights = ModelWeights {
            params: LinearParams {
                n_classes,
                dim,
                weights,
                bias,
            },
            reg_lambda,
            standardization,
            train_meta,
        };
        if !model_weights.is_finite() {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        EgoModel::from_parts(
            ego_id,
            class_set,
            TimeZone::from_offset_secs(offset)?,
            model_weights,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::ModelFormat(format!("expected `{key}` line, found {line:?}")))
}

fn expect(line: &str, key: &str) -> Result<()> {
    if line == key {
        Ok(())
    } else {
        Err(Error::ModelFormat(format!("expected `{key}`, found {line:?}")))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::ModelFormat(format!("bad number {s:?}")))
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let values = line
        .split(' ')
        .map(parse_num::<f64>)
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::ModelFormat(format!(
            "expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}
