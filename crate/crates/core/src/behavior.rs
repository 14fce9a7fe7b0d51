//! Per-ego eligibility, alter filtering and the chronological split.

use rayon::prelude::*;

use crate::calldata::{CallEvent, Dataset, EgoLog};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoModelConfig {
    pub min_events: usize,
    pub train_fraction: f64,
}

impl Default for EgoModelConfig {
    fn default() -> Self {
        EgoModelConfig {
            min_events: 50,
            train_fraction: 0.8,
        }
    }
}

impl EgoModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_events < 1 {
            return Err(Error::InvalidConfig("min_events must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Alters retained as prediction classes and those filtered out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlterFilter {
    /// Retained alters in alter-id order.
    pub class_set: Vec<String>,
    pub removed: Vec<String>,
}

/// Keeps alters whose outgoing call count is at least the mean count over
/// all called alters.
pub fn filter_alters(ego: &EgoLog) -> Result<AlterFilter> {
    let counts = ego.outgoing_counts();
    if counts.is_empty() {
        return Err(Error::NoOutgoingCalls(ego.ego_id.clone()));
    }
    let total: usize = counts.values().sum();
    let n = counts.len();
    let mut filter = AlterFilter {
        class_set: Vec::new(),
        removed: Vec::new(),
    };
    for (alter, count) in counts {
        // count >= total / n, kept in integers
        if count * n >= total {
            filter.class_set.push(alter.to_string());
        } else {
            filter.removed.push(alter.to_string());
        }
    }
    Ok(filter)
}

/// Number of training events: `ceil(fraction * n)`, ignoring float noise
/// when the product is an integer.
pub fn train_size(n: usize, fraction: f64) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let size = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (size as usize).min(n)
}

/// Splits time-ordered events into a leading train part and trailing test part.
pub fn split_chronological(
    ego: &EgoLog,
    config: &EgoModelConfig,
) -> Result<(Vec<CallEvent>, Vec<CallEvent>)> {
    let n = ego.events.len();
    if n < config.min_events {
        return Err(Error::TooFewEvents {
            needed: config.min_events,
            got: n,
        });
    }
    let cut = train_size(n, config.train_fraction);
    Ok((ego.events[..cut].to_vec(), ego.events[cut..].to_vec()))
}

/// An ego ready for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredEgo {
    pub ego_id: String,
    pub class_set: Vec<String>,
    pub removed: Vec<String>,
    /// Every event, time ordered; the first `n_train` are the training split.
    pub events: Vec<CallEvent>,
    pub n_train: usize,
}

impl FilteredEgo {
    pub fn prepare(ego: &EgoLog, config: &EgoModelConfig) -> Result<Self> {
        config.validate()?;
        let n = ego.events.len();
        if n < config.min_events {
            return Err(Error::TooFewEvents {
                needed: config.min_events,
                got: n,
            });
        }
        let filter = filter_alters(ego)?;
        Ok(FilteredEgo {
            ego_id: ego.ego_id.clone(),
            class_set: filter.class_set,
            removed: filter.removed,
            events: ego.events.clone(),
            n_train: train_size(n, config.train_fraction),
        })
    }

    pub fn train_events(&self) -> &[CallEvent] {
        &self.events[..self.n_train]
    }

    pub fn test_events(&self) -> &[CallEvent] {
        &self.events[self.n_train..]
    }

    pub fn class_index(&self, alter: &str) -> Option<usize> {
        self.class_set.iter().position(|a| a == alter)
    }

    /// Outgoing test calls whose callee is a class; these are the accuracy
    /// denominator.
    pub fn in_class_test_calls(&self) -> impl Iterator<Item = (usize, &CallEvent)> {
        self.events
            .iter()
            .enumerate()
            .skip(self.n_train)
            .filter(|(_, e)| e.is_outgoing() && self.class_index(&e.alter_id).is_some())
    }

    /// Outgoing test calls to filtered-out alters.
    pub fn out_of_class_test_calls(&self) -> usize {
        self.test_events()
            .iter()
            .filter(|e| e.is_outgoing() && self.class_index(&e.alter_id).is_none())
            .count()
    }

    /// Enough events, at least two classes, and something to predict.
    pub fn is_eligible(&self) -> bool {
        self.class_set.len() >= 2 && self.in_class_test_calls().next().is_some()
    }
}

/// Egos eligible for prediction, in dataset order.
pub fn eligible_egos(dataset: &Dataset, config: &EgoModelConfig) -> Vec<String> {
    dataset
        .egos
        .par_iter()
        .filter_map(|log| match FilteredEgo::prepare(log, config) {
            Ok(f) if f.is_eligible() => Some(f.ego_id),
            _ => None,
        })
        .collect()
}
