//! Fixed-resolution count series for one ego–alter pair.

use std::fmt;
use std::str::FromStr;

use crate::calldata::{CallEvent, TimeZone, Timestamp, Window, SECS_PER_DAY, SECS_PER_HOUR};
use crate::error::{Error, Result};

/// Local hours `[DAYTIME_START_HOUR, DAYTIME_END_HOUR)` count as daytime.
pub const DAYTIME_START_HOUR: u32 = 7;
pub const DAYTIME_END_HOUR: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Hourly,
    Daily,
    /// Hourly bins restricted to local daytime hours.
    DaytimeHourly,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::Daily, Resolution::Hourly, Resolution::DaytimeHourly];

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Hourly => "hourly",
            Resolution::Daily => "daily",
            Resolution::DaytimeHourly => "daytime_hourly",
        }
    }

    fn period(self) -> i64 {
        match self {
            Resolution::Daily => SECS_PER_DAY,
            Resolution::Hourly | Resolution::DaytimeHourly => SECS_PER_HOUR,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hourly" => Ok(Resolution::Hourly),
            "daily" => Ok(Resolution::Daily),
            "daytime_hourly" => Ok(Resolution::DaytimeHourly),
            _ => Err(Error::InvalidConfig(format!("unknown resolution {s:?}"))),
        }
    }
}

pub fn is_daytime(tz: TimeZone, ts: Timestamp) -> bool {
    (DAYTIME_START_HOUR..DAYTIME_END_HOUR).contains(&tz.hour_of_day(ts))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSeries {
    pub ego_id: String,
    pub alter_id: String,
    pub resolution: Resolution,
    pub counts: Vec<u32>,
}

impl PairSeries {
    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| f64::from(c)).collect()
    }
}

/// Counts timestamps per bin. Bins are aligned to local hour or day
/// boundaries and cover every instant of `window`; timestamps outside the
/// window are ignored.
pub fn bin_counts(
    timestamps: impl IntoIterator<Item = Timestamp>,
    resolution: Resolution,
    window: Window,
    tz: TimeZone,
) -> Result<Vec<u32>> {
    if window.end <= window.start {
        return Err(Error::EmptyWindow);
    }
    let period = resolution.period();
    let first = tz.floor_to(window.start, period);
    let n_bins = (window.end - first + period - 1) / period;
    let mut counts = vec![0u32; n_bins as usize];
    for ts in timestamps {
        if window.contains(ts) {
            counts[((ts - first) / period) as usize] += 1;
        }
    }
    if resolution == Resolution::DaytimeHourly {
        counts = counts
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| is_daytime(tz, first + i as i64 * period))
            .map(|(_, c)| c)
            .collect();
    }
    Ok(counts)
}

/// Bins one pair's events; the pair is taken from the first event, or
/// from `pair` when given.
pub fn bin_series(
    pair: (&str, &str),
    events: &[CallEvent],
    resolution: Resolution,
    window: Window,
    tz: TimeZone,
) -> Result<PairSeries> {
    let counts = bin_counts(events.iter().map(|e| e.timestamp), resolution, window, tz)?;
    Ok(PairSeries {
        ego_id: pair.0.to_string(),
        alter_id: pair.1.to_string(),
        resolution,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calldata::Direction;

    const DAY0: i64 = 1_429_401_600; // 2015-04-19T00:00:00Z

    fn ev(ts: i64) -> CallEvent {
        CallEvent::new("u", "a", ts, Direction::Outgoing)
    }

    #[test]
    fn hourly_two_bins() {
        let events = [ev(DAY0 + 10), ev(DAY0 + 20), ev(DAY0 + 3599)];
        let s = bin_series(
            ("u", "a"),
            &events,
            Resolution::Hourly,
            Window::new(DAY0, DAY0 + 7200).unwrap(),
            TimeZone::UTC,
        )
        .unwrap();
        assert_eq!(s.counts, vec![3, 0]);
    }

    #[test]
    fn daytime_keeps_thirteen_bins() {
        let events = [ev(DAY0 + 6 * 3600 + 1800), ev(DAY0 + 7 * 3600 + 1800)];
        let window = Window::new(DAY0, DAY0 + SECS_PER_DAY).unwrap();
        let s = bin_series(("u", "a"), &events, Resolution::DaytimeHourly, window, TimeZone::UTC)
            .unwrap();
        let mut expected = vec![0; 13];
        expected[0] = 1;
        assert_eq!(s.counts, expected);
    }

    #[test]
    fn daytime_follows_local_clock() {
        let tz = TimeZone::from_offset_secs(2 * 3600).unwrap();
        // 05:30 UTC is 07:30 local.
        let events = [ev(DAY0 + 5 * 3600 + 1800)];
        let window = Window::new(DAY0 - 2 * 3600, DAY0 + 22 * 3600).unwrap();
        let s = bin_series(("u", "a"), &events, Resolution::DaytimeHourly, window, tz).unwrap();
        assert_eq!(s.counts.len(), 13);
        assert_eq!(s.counts[0], 1);
    }

    #[test]
    fn empty_events_give_zeros() {
        let window = Window::new(DAY0, DAY0 + 3 * SECS_PER_DAY).unwrap();
        let s = bin_series(("u", "a"), &[], Resolution::Daily, window, TimeZone::UTC).unwrap();
        assert_eq!(s.counts, vec![0, 0, 0]);
    }

    #[test]
    fn partial_window_rounds_out() {
        let window = Window::new(DAY0 + 1800, DAY0 + 3 * 3600 + 1).unwrap();
        let counts = bin_counts([DAY0 + 3 * 3600], Resolution::Hourly, window, TimeZone::UTC).unwrap();
        assert_eq!(counts, vec![0, 0, 0, 1]);
    }

    #[test]
    fn empty_window_errors() {
        let w = Window { start: 5, end: 5 };
        assert!(matches!(
            bin_counts([], Resolution::Hourly, w, TimeZone::UTC),
            Err(Error::EmptyWindow)
        ));
    }
}
