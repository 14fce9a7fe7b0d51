//! Call-log ingestion, validation and dataset summaries.
//!
//! A call log is a CSV with header `ego_id,alter_id,timestamp,direction`.
//! Timestamps are either integer seconds since the Unix epoch or a naive
//! `YYYY-MM-DDTHH:MM:SS` local time in the dataset's declared [`TimeZone`].
//! Internally every instant is an `i64` epoch second.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

/// Seconds since 1970-01-01T00:00:00Z.
pub type Timestamp = i64;

pub const SECS_PER_MINUTE: i64 = 60;
pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;
pub const SECS_PER_WEEK: i64 = 7 * SECS_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Incoming,
    Outgoing,
    /// An incoming call that was not answered.
    Missed,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Incoming, Direction::Outgoing, Direction::Missed];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Incoming => "incoming",
            Direction::Outgoing => "outgoing",
            Direction::Missed => "missed",
        }
    }

    /// Position in [`Direction::ALL`]; used for one-hot encodings.
    pub fn index(self) -> usize {
        match self {
            Direction::Incoming => 0,
            Direction::Outgoing => 1,
            Direction::Missed => 2,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "incoming" => Ok(Direction::Incoming),
            "outgoing" => Ok(Direction::Outgoing),
            "missed" => Ok(Direction::Missed),
            _ => Err(Error::UnknownDirection(s.to_string())),
        }
    }
}

/// Fixed offset from UTC used to derive local clock time (hour, weekday).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TimeZone {
    offset_secs: i32,
}

impl TimeZone {
    pub const UTC: TimeZone = TimeZone { offset_secs: 0 };

    pub fn from_offset_secs(offset_secs: i32) -> Result<Self> {
        if offset_secs.abs() >= SECS_PER_DAY as i32 {
            return Err(Error::InvalidConfig(format!(
                "utc offset {offset_secs}s is not within one day"
            )));
        }
        Ok(TimeZone { offset_secs })
    }

    pub fn offset_secs(self) -> i32 {
        self.offset_secs
    }

    pub fn local(self, ts: Timestamp) -> i64 {
        ts + i64::from(self.offset_secs)
    }

    /// Minutes since local midnight, in `0..1440`.
    pub fn minute_of_day(self, ts: Timestamp) -> u32 {
        (self.local(ts).rem_euclid(SECS_PER_DAY) / SECS_PER_MINUTE) as u32
    }

    pub fn hour_of_day(self, ts: Timestamp) -> u32 {
        (self.local(ts).rem_euclid(SECS_PER_DAY) / SECS_PER_HOUR) as u32
    }

    /// Local weekday with Sunday = 0 through Saturday = 6.
    pub fn weekday(self, ts: Timestamp) -> u32 {
        // 1970-01-01 was a Thursday.
        (self.local(ts).div_euclid(SECS_PER_DAY) + 4).rem_euclid(7) as u32
    }

    /// Hour of the local week, Sunday 00:00 = 0, in `0..168`.
    pub fn hour_of_week(self, ts: Timestamp) -> u32 {
        self.weekday(ts) * 24 + self.hour_of_day(ts)
    }

    /// Start of the local period of length `period` containing `ts`.
    pub fn floor_to(self, ts: Timestamp, period: i64) -> Timestamp {
        let local = self.local(ts);
        local - local.rem_euclid(period) - i64::from(self.offset_secs)
    }
}

/// Half-open interval `[start, end)` of epoch seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if end <= start {
            return Err(Error::EmptyWindow);
        }
        Ok(Window { start, end })
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts < self.end
    }

    pub fn len_secs(&self) -> i64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CallEvent {
    pub ego_id: String,
    pub alter_id: String,
    pub timestamp: Timestamp,
    pub direction: Direction,
}

impl CallEvent {
    pub fn new(
        ego_id: impl Into<String>,
        alter_id: impl Into<String>,
        timestamp: Timestamp,
        direction: Direction,
    ) -> Self {
        CallEvent {
            ego_id: ego_id.into(),
            alter_id: alter_id.into(),
            timestamp,
            direction,
        }
    }

    pub fn is_outgoing(&self) -> bool {
        self.direction == Direction::Outgoing
    }
}

/// All events of one ego, sorted by time.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoLog {
    pub ego_id: String,
    pub events: Vec<CallEvent>,
    pub window: Window,
}

impl EgoLog {
    /// Builds a log, stably sorting `events` by timestamp.
    ///
    /// When `window` is `None` the span from the first event to one second
    /// past the last event is used.
    pub fn new(
        ego_id: impl Into<String>,
        mut events: Vec<CallEvent>,
        window: Option<Window>,
    ) -> Result<Self> {
        let ego_id = ego_id.into();
        if let Some(bad) = events.iter().find(|e| e.ego_id != ego_id) {
            return Err(Error::InvalidConfig(format!(
                "event for ego {:?} in log of ego {:?}",
                bad.ego_id, ego_id
            )));
        }
        events.sort_by_key(|e| e.timestamp);
        let window = match window {
            Some(w) => {
                if let Some(e) = events.iter().find(|e| !w.contains(e.timestamp)) {
                    return Err(Error::InvalidConfig(format!(
                        "event at {} outside observation window",
                        e.timestamp
                    )));
                }
                w
            }
            None => match (events.first(), events.last()) {
                (Some(first), Some(last)) => Window::new(first.timestamp, last.timestamp + 1)?,
                _ => return Err(Error::EmptyDataset),
            },
        };
        Ok(EgoLog { ego_id, events, window })
    }

    pub fn outgoing(&self) -> impl Iterator<Item = &CallEvent> {
        self.events.iter().filter(|e| e.is_outgoing())
    }

    /// Outgoing call counts per alter, in alter-id order.
    pub fn outgoing_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for e in self.outgoing() {
            *counts.entry(e.alter_id.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

/// A parsed call log: one [`EgoLog`] per ego, in ego-id order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub egos: Vec<EgoLog>,
    pub timezone: TimeZone,
    /// Rows discarded because they fell outside the requested window.
    pub dropped_outside_window: usize,
}

impl Dataset {
    pub fn from_egos(mut egos: Vec<EgoLog>, timezone: TimeZone) -> Result<Self> {
        if egos.iter().all(|e| e.events.is_empty()) {
            return Err(Error::EmptyDataset);
        }
        egos.sort_by(|a, b| a.ego_id.cmp(&b.ego_id));
        Ok(Dataset {
            egos,
            timezone,
            dropped_outside_window: 0,
        })
    }

    pub fn n_events(&self) -> usize {
        self.egos.iter().map(|e| e.events.len()).sum()
    }

    pub fn ego(&self, ego_id: &str) -> Option<&EgoLog> {
        self.egos
            .binary_search_by(|e| e.ego_id.as_str().cmp(ego_id))
            .ok()
            .map(|i| &self.egos[i])
    }
}

/// Parses an instant given as epoch seconds or a local `YYYY-MM-DDTHH:MM:SS`.
pub fn parse_instant(raw: &str, tz: TimeZone) -> Result<Timestamp> {
    parse_timestamp(raw, tz).map_err(Error::InvalidConfig)
}

fn parse_timestamp(raw: &str, tz: TimeZone) -> std::result::Result<Timestamp, String> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Ok(secs);
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .map(|dt| dt.and_utc().timestamp() - i64::from(tz.offset_secs()))
        .map_err(|_| format!("invalid timestamp {raw:?}"))
}

/// Reads a call log from `path`. See [`read_call_log`].
pub fn parse_call_log(
    path: impl AsRef<Path>,
    window: Option<Window>,
    timezone: TimeZone,
) -> Result<Dataset> {
    let file = File::open(path)?;
    read_call_log(BufReader::new(file), window, timezone)
}

/// Parses call-log CSV from any reader.
///
/// Row numbers in errors count the header as row 1.
pub fn read_call_log<R: Read>(
    reader: R,
    window: Option<Window>,
    timezone: TimeZone,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let expected = ["ego_id", "alter_id", "timestamp", "direction"];
    if header.len() != expected.len()
        || header.iter().zip(expected).any(|(h, x)| !h.eq_ignore_ascii_case(x))
    {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), header),
        ));
    }

    let mut by_ego: BTreeMap<String, Vec<CallEvent>> = BTreeMap::new();
    let mut dropped = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        if record.len() != 4 {
            return Err(malformed(row, format!("expected 4 fields, found {}", record.len())));
        }
        let (ego, alter) = (&record[0], &record[1]);
        if ego.is_empty() || alter.is_empty() {
            return Err(malformed(row, "empty identifier".into()));
        }
        if ego == alter {
            return Err(malformed(row, format!("ego and alter are both {ego:?}")));
        }
        let timestamp = parse_timestamp(&record[2], timezone).map_err(|r| malformed(row, r))?;
        let direction: Direction = record[3]
            .parse()
            .map_err(|e: Error| malformed(row, e.to_string()))?;
        if window.is_some_and(|w| !w.contains(timestamp)) {
            dropped += 1;
            continue;
        }
        by_ego
            .entry(ego.to_string())
            .or_default()
            .push(CallEvent::new(ego, alter, timestamp, direction));
    }

    if by_ego.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let egos = by_ego
        .into_iter()
        .map(|(ego, events)| EgoLog::new(ego, events, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        egos,
        timezone,
        dropped_outside_window: dropped,
    })
}

fn malformed(row: usize, reason: String) -> Error {
    Error::MalformedRow { row, reason }
}

/// Writes events as call-log CSV with integer epoch timestamps.
pub fn write_call_log<'a, W, I>(writer: W, events: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a CallEvent>,
{
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["ego_id", "alter_id", "timestamp", "direction"])
        .map_err(csv_io)?;
    for e in events {
        wtr.write_record([
            e.ego_id.as_str(),
            e.alter_id.as_str(),
            &e.timestamp.to_string(),
            e.direction.as_str(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Partitions an ego's events by alter. Each group keeps time order.
pub fn group_pairs(log: &EgoLog) -> BTreeMap<String, Vec<CallEvent>> {
    let mut groups: BTreeMap<String, Vec<CallEvent>> = BTreeMap::new();
    for e in &log.events {
        groups.entry(e.alter_id.clone()).or_default().push(e.clone());
    }
    groups
}

/// Normalized histogram with fixed-width bins; bin `i` covers
/// `[i * bin_width, (i + 1) * bin_width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub masses: BTreeMap<i64, f64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Self {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for v in values {
            *counts.entry((v / bin_width).floor() as i64).or_insert(0) += 1;
        }
        let n = values.len() as f64;
        let masses = counts.into_iter().map(|(b, c)| (b, c as f64 / n)).collect();
        Histogram { bin_width, masses }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn bin_lower(&self, bin: i64) -> f64 {
        bin as f64 * self.bin_width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSummary {
    pub n_egos: usize,
    pub n_events: usize,
    pub n_pairs: usize,
    pub mean_calls_per_day: f64,
    /// Distribution over egos of events per active day.
    pub calls_per_day_pdf: Histogram,
    /// Distribution over egos of the mean outgoing calls per contact.
    pub mean_calls_per_contact_hist: Histogram,
}

/// Events per day over the ego's first-to-last event span, at least one day.
pub fn calls_per_day(log: &EgoLog) -> f64 {
    match (log.events.first(), log.events.last()) {
        (Some(first), Some(last)) => {
            let days = ((last.timestamp - first.timestamp) as f64 / SECS_PER_DAY as f64).max(1.0);
            log.events.len() as f64 / days
        }
        _ => 0.0,
    }
}

pub fn summarize(egos: &[EgoLog]) -> Result<DatasetSummary> {
    if egos.iter().all(|e| e.events.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let active: Vec<&EgoLog> = egos.iter().filter(|e| !e.events.is_empty()).collect();
    let per_day: Vec<f64> = active.iter().map(|e| calls_per_day(e)).collect();
    let per_contact: Vec<f64> = active
        .iter()
        .filter_map(|e| {
            let counts = e.outgoing_counts();
            (!counts.is_empty())
                .then(|| counts.values().sum::<usize>() as f64 / counts.len() as f64)
        })
        .collect();
    let n_pairs = active
        .iter()
        .map(|e| {
            let mut alters: Vec<&str> = e.events.iter().map(|x| x.alter_id.as_str()).collect();
            alters.sort_unstable();
            alters.dedup();
            alters.len()
        })
        .sum();
    Ok(DatasetSummary {
        n_egos: active.len(),
        n_events: active.iter().map(|e| e.events.len()).sum(),
        n_pairs,
        mean_calls_per_day: per_day.iter().sum::<f64>() / per_day.len() as f64,
        calls_per_day_pdf: Histogram::from_values(&per_day, 1.0),
        mean_calls_per_contact_hist: Histogram::from_values(&per_contact, 1.0),
    })
}
