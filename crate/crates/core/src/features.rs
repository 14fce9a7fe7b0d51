//! Encoding of a query context into a dense feature vector.
//!
//! Layout for `C` classes:
//!
//! | offset        | width | block                                          |
//! |---------------|-------|------------------------------------------------|
//! | 0             | 2     | sin, cos of the minute of day                  |
//! | 2             | 7     | weekday one-hot, Sunday first                  |
//! | 9             | 1     | night flag (local hour outside 07:00–20:00)    |
//! | 10            | C     | alter of the last event                        |
//! | 10 + C        | C     | alter of the second-to-last event              |
//! | 10 + 2C       | 3     | direction of the last event                    |
//! | 13 + 2C       | 2     | ln(1 + minutes since last event / outgoing)    |
//! | 15 + 2C       | 1     | no-history flag                                |

use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::calldata::{CallEvent, TimeZone, Timestamp, SECS_PER_MINUTE};
use crate::error::{Error, Result};
use crate::stats::series::is_daytime;

/// Index of a call's callee in the class set, or out of class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Class(usize),
    OutOfClass,
}

pub fn label_of(event: &CallEvent, class_set: &[String]) -> Result<Label> {
    if !event.is_outgoing() {
        return Err(Error::NotOutgoing);
    }
    Ok(class_set
        .iter()
        .position(|a| *a == event.alter_id)
        .map_or(Label::OutOfClass, Label::Class))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_classes: usize,
}

impl FeatureLayout {
    pub const TIME: usize = 0;
    pub const WEEKDAY: usize = 2;
    pub const NIGHT: usize = 9;
    pub const LAST_ALTER: usize = 10;

    pub fn second_last_alter(&self) -> usize {
        Self::LAST_ALTER + self.n_classes
    }

    pub fn last_direction(&self) -> usize {
        Self::LAST_ALTER + 2 * self.n_classes
    }

    pub fn recency(&self) -> usize {
        self.last_direction() + 3
    }

    pub fn no_history(&self) -> usize {
        self.recency() + 2
    }

    pub fn dim(&self) -> usize {
        self.no_history() + 1
    }

    /// Indices of the real-valued (non-indicator) features.
    pub fn continuous(&self) -> [usize; 4] {
        [Self::TIME, Self::TIME + 1, self.recency(), self.recency() + 1]
    }
}

/// Encodes contexts for one ego's class set.
#[derive(Clone, Debug)]
pub struct FeatureEncoder {
    layout: FeatureLayout,
    index: HashMap<String, usize>,
    timezone: TimeZone,
}

impl FeatureEncoder {
    pub fn new(class_set: &[String], timezone: TimeZone) -> Result<Self> {
        if class_set.is_empty() {
            return Err(Error::EmptyClassSet);
        }
        let index = class_set
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(FeatureEncoder {
            layout: FeatureLayout {
                n_classes: class_set.len(),
            },
            index,
            timezone,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn class_of(&self, alter: &str) -> Option<usize> {
        self.index.get(alter).copied()
    }

    /// Encodes the context at `t`. Only events strictly before `t` in
    /// `history` are consulted.
    pub fn encode(&self, history: &[CallEvent], t: Timestamp) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.encode_into(history, t, &mut out);
        out
    }

    pub fn encode_into(&self, history: &[CallEvent], t: Timestamp, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim());
        out.fill(0.0);
        let layout = self.layout;
        let tz = self.timezone;

        let phase = TAU * f64::from(tz.minute_of_day(t)) / 1440.0;
        out[FeatureLayout::TIME] = phase.sin();
        out[FeatureLayout::TIME + 1] = phase.cos();
        out[FeatureLayout::WEEKDAY + tz.weekday(t) as usize] = 1.0;
        if !is_daytime(tz, t) {
            out[FeatureLayout::NIGHT] = 1.0;
        }

        let past = &history[..history.partition_point(|e| e.timestamp < t)];
        let Some(last) = past.last() else {
            out[layout.no_history()] = 1.0;
            return;
        };
        if let Some(c) = self.class_of(&last.alter_id) {
            out[FeatureLayout::LAST_ALTER + c] = 1.0;
        }
        if let Some(second) = past.len().checked_sub(2).map(|i| &past[i]) {
            if let Some(c) = self.class_of(&second.alter_id) {
                out[layout.second_last_alter() + c] = 1.0;
            }
        }
        out[layout.last_direction() + last.direction.index()] = 1.0;
        out[layout.recency()] = minutes_between(last.timestamp, t).ln_1p();
        if let Some(out_call) = past.iter().rev().find(|e| e.is_outgoing()) {
            out[layout.recency() + 1] = minutes_between(out_call.timestamp, t).ln_1p();
        }
    }
}

fn minutes_between(earlier: Timestamp, later: Timestamp) -> f64 {
    (later - earlier) as f64 / SECS_PER_MINUTE as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calldata::{Direction, SECS_PER_WEEK};

    // 2015-04-22T14:30:00Z, a Wednesday.
    const WED_1430: i64 = 1_429_713_000;

    fn classes() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn wednesday_afternoon_after_outgoing_call() {
        let enc = FeatureEncoder::new(&classes(), TimeZone::UTC).unwrap();
        let l = enc.layout();
        let history = vec![
            CallEvent::new("u", "a", WED_1430 - 3 * 3600, Direction::Incoming),
            CallEvent::new("u", "c", WED_1430 - 1800, Direction::Outgoing),
        ];
        let x = enc.encode(&history, WED_1430);
        assert_eq!(x.len(), 16 + 2 * 3);
        assert_eq!(&x[2..9], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(x[FeatureLayout::NIGHT], 0.0);
        assert_eq!(&x[10..13], &[0.0, 0.0, 1.0]);
        assert_eq!(&x[l.second_last_alter()..l.second_last_alter() + 3], &[1.0, 0.0, 0.0]);
        assert_eq!(&x[l.last_direction()..l.last_direction() + 3], &[0.0, 1.0, 0.0]);
        assert!((x[l.recency()] - 31f64.ln()).abs() < 1e-12);
        assert!((x[l.recency() + 1] - 31f64.ln()).abs() < 1e-12);
        assert_eq!(x[l.no_history()], 0.0);
        let (s, c) = (x[0], x[1]);
        assert!((s * s + c * c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn night_and_midnight() {
        let enc = FeatureEncoder::new(&classes(), TimeZone::UTC).unwrap();
        let midnight = 1_429_660_800;
        let x = enc.encode(&[], midnight + 3 * 3600);
        assert_eq!(x[FeatureLayout::NIGHT], 1.0);
        let x = enc.encode(&[], midnight);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[1], 1.0);
        assert_eq!(x[enc.layout().no_history()], 1.0);
        assert_eq!(x[enc.layout().recency()], 0.0);
    }

    #[test]
    fn ignores_events_at_or_after_query() {
        let enc = FeatureEncoder::new(&classes(), TimeZone::UTC).unwrap();
        let history = vec![
            CallEvent::new("u", "a", WED_1430 - 60, Direction::Outgoing),
            CallEvent::new("u", "b", WED_1430, Direction::Outgoing),
        ];
        assert_eq!(enc.encode(&history, WED_1430), enc.encode(&history[..1], WED_1430));
    }

    #[test]
    fn out_of_class_last_alter_is_all_zero() {
        let enc = FeatureEncoder::new(&classes(), TimeZone::UTC).unwrap();
        let history = vec![CallEvent::new("u", "zzz", WED_1430 - 60, Direction::Missed)];
        let x = enc.encode(&history, WED_1430);
        assert!(x[10..13].iter().all(|&v| v == 0.0));
        assert_eq!(x[enc.layout().recency() + 1], 0.0);
    }

    #[test]
    fn weekly_shift_invariance() {
        let enc = FeatureEncoder::new(&classes(), TimeZone::UTC).unwrap();
        let history = vec![
            CallEvent::new("u", "b", WED_1430 - 7200, Direction::Missed),
            CallEvent::new("u", "a", WED_1430 - 100, Direction::Outgoing),
        ];
        let shifted: Vec<_> = history
            .iter()
            .map(|e| CallEvent { timestamp: e.timestamp + SECS_PER_WEEK, ..e.clone() })
            .collect();
        assert_eq!(enc.encode(&history, WED_1430), enc.encode(&shifted, WED_1430 + SECS_PER_WEEK));
    }

    #[test]
    fn labels() {
        let cs = classes();
        let out = CallEvent::new("u", "a", 0, Direction::Outgoing);
        assert_eq!(label_of(&out, &cs).unwrap(), Label::Class(0));
        let other = CallEvent::new("u", "q", 0, Direction::Outgoing);
        assert_eq!(label_of(&other, &cs).unwrap(), Label::OutOfClass);
        let inc = CallEvent::new("u", "a", 0, Direction::Incoming);
        assert!(matches!(label_of(&inc, &cs), Err(Error::NotOutgoing)));
        assert!(matches!(FeatureEncoder::new(&[], TimeZone::UTC), Err(Error::EmptyClassSet)));
    }
}
