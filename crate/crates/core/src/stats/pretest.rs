//! Dataset-wide regularity pretests: Ljung–Box per ego–alter pair at three
//! resolutions, and an exponential KS test per ego over outgoing call counts.

use rayon::prelude::*;

use crate::calldata::{group_pairs, Dataset, EgoLog, TimeZone};
use crate::stats::ks::{ks_exponential, KsResult};
use crate::stats::portmanteau::{ljung_box, QTestResult};
use crate::stats::series::{bin_series, Resolution};

/// Outcome of a single test; preconditions that fail are kept as reasons.
pub type TestOutcome<T> = std::result::Result<T, String>;

#[derive(Clone, Debug, PartialEq)]
pub struct PairTest {
    pub ego_id: String,
    pub alter_id: String,
    pub resolution: Resolution,
    pub outcome: TestOutcome<QTestResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoKsTest {
    pub ego_id: String,
    pub outcome: TestOutcome<KsResult>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionSummary {
    pub resolution: Resolution,
    pub tested: usize,
    pub untestable: usize,
    pub rejected: usize,
}

impl ResolutionSummary {
    /// Fraction of testable pairs with p < 0.05; NaN when none were testable.
    pub fn reject_fraction(&self) -> f64 {
        self.rejected as f64 / self.tested as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretestReport {
    pub pairs: Vec<PairTest>,
    pub ks: Vec<EgoKsTest>,
    pub by_resolution: Vec<ResolutionSummary>,
    pub ks_tested: usize,
    pub ks_untestable: usize,
    pub ks_not_rejected: usize,
}

impl PretestReport {
    pub fn resolution(&self, r: Resolution) -> &ResolutionSummary {
        self.by_resolution
            .iter()
            .find(|s| s.resolution == r)
            .expect("every resolution is summarized")
    }

    /// Fraction of testable egos for which the exponential fit is not rejected.
    pub fn ks_non_reject_fraction(&self) -> f64 {
        self.ks_not_rejected as f64 / self.ks_tested as f64
    }
}

fn pair_tests(log: &EgoLog, tz: TimeZone, max_lag: usize) -> Vec<PairTest> {
    let mut out = Vec::new();
    for (alter, events) in group_pairs(log) {
        for resolution in Resolution::ALL {
            let outcome = bin_series((&log.ego_id, &alter), &events, resolution, log.window, tz)
                .and_then(|s| ljung_box(&s.as_f64(), max_lag))
                .map_err(|e| e.to_string());
            out.push(PairTest {
                ego_id: log.ego_id.clone(),
                alter_id: alter.clone(),
                resolution,
                outcome,
            });
        }
    }
    out
}

/// Per-alter outgoing totals of one ego, the sample for the exponential fit.
pub fn outgoing_count_sample(log: &EgoLog) -> Vec<f64> {
    log.outgoing_counts().values().map(|&c| c as f64).collect()
}

pub fn pretest_ego(log: &EgoLog, tz: TimeZone, max_lag: usize) -> (Vec<PairTest>, EgoKsTest) {
    let ks = EgoKsTest {
        ego_id: log.ego_id.clone(),
        outcome: ks_exponential(&outgoing_count_sample(log)).map_err(|e| e.to_string()),
    };
    (pair_tests(log, tz, max_lag), ks)
}

/// Runs every pretest. Egos are processed in parallel; output order follows
/// the dataset's ego order.
pub fn pretest_dataset(dataset: &Dataset, max_lag: usize) -> PretestReport {
    let per_ego: Vec<_> = dataset
        .egos
        .par_iter()
        .map(|log| pretest_ego(log, dataset.timezone, max_lag))
        .collect();

    let mut pairs = Vec::new();
    let mut ks = Vec::with_capacity(per_ego.len());
    for (p, k) in per_ego {
        pairs.extend(p);
        ks.push(k);
    }

    let by_resolution = Resolution::ALL
        .iter()
        .map(|&resolution| {
            let mut s = ResolutionSummary {
                resolution,
                tested: 0,
                untestable: 0,
                rejected: 0,
            };
            for p in pairs.iter().filter(|p| p.resolution == resolution) {
                match &p.outcome {
                    Ok(q) => {
                        s.tested += 1;
                        s.rejected += usize::from(q.reject_at_5pct);
                    }
                    Err(_) => s.untestable += 1,
                }
            }
            s
        })
        .collect();

    let ks_tested = ks.iter().filter(|k| k.outcome.is_ok()).count();
    let ks_not_rejected = ks
        .iter()
        .filter(|k| matches!(&k.outcome, Ok(r) if !r.reject_at_5pct))
        .count();
    PretestReport {
        ks_untestable: ks.len() - ks_tested,
        pairs,
        ks,
        by_resolution,
        ks_tested,
        ks_not_rejected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calldata::{CallEvent, Direction, Window, SECS_PER_DAY};

    #[test]
    fn untestable_pairs_are_reported() {
        // One call in a two-day window: hourly is testable, daily is too short.
        let start = 1_429_401_600;
        let log = EgoLog::new(
            "u",
            vec![CallEvent::new("u", "a", start + 100, Direction::Outgoing)],
            Some(Window::new(start, start + 2 * SECS_PER_DAY).unwrap()),
        )
        .unwrap();
        let ds = Dataset::from_egos(vec![log], TimeZone::UTC).unwrap();
        let report = pretest_dataset(&ds, 6);
        assert_eq!(report.pairs.len(), 3);
        assert_eq!(report.resolution(Resolution::Daily).untestable, 1);
        assert_eq!(report.resolution(Resolution::Hourly).tested, 1);
        assert_eq!(report.ks_untestable, 1);
        assert!(report.ks[0].outcome.is_err());
    }
}
