//! OHLCV candle ingestion, validation, and three-class trend labeling.
//!
//! Candles arrive as CSV with the header `timestamp,open,high,low,close,volume`
//! (epoch seconds, decimal point, one daily bar per line). Validation enforces
//! per-bar price invariants, strictly increasing timestamps, and gap-free daily
//! spacing. A missing daily bar is a hard error rather than something to
//! forward-fill: the market trades around the clock, so a hole means the data
//! is corrupt.
//!
//! Labels map a forward percent return to `Up`/`Down`/`Sideways` using
//! horizon-specific tolerance bands. Returns exactly on a band edge count as
//! `Sideways` (strict inequalities for `Up` and `Down`).

use std::fmt;
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds per daily bar.
pub const DAY_SECONDS: i64 = 86_400;

/// Errors from candle parsing, validation, and labeling.
#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: candle invariant violated: {reason}")]
    InvalidCandle { line: usize, reason: String },
    #[error("duplicate timestamp {timestamp} (line {line})")]
    DuplicateTimestamp { timestamp: i64, line: usize },
    #[error("gap in series: expected timestamp {expected}, found {found}")]
    Gap { expected: i64, found: i64 },
    #[error("missing or invalid header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("empty candle series")]
    Empty,
    #[error("horizon of {horizon_days}d from index {index} extends past end of series (length {len})")]
    HorizonOutOfRange {
        index: usize,
        horizon_days: u32,
        len: usize,
    },
    #[error("unsupported horizon: {0} days (valid: 1, 7, 15)")]
    UnsupportedHorizon(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One daily OHLCV bar. Constructed through [`Candle::new`], which enforces
/// the price/volume invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    /// Bar open time, UTC epoch seconds.
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    /// Validates and builds a candle. Returns a human-readable reason on
    /// invariant violation; callers attach line context.
    pub fn new(
        timestamp: i64,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: f64,
    ) -> Result<Self, String> {
        for (name, v) in [("open", open), ("high", high), ("low", low), ("close", close)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a strictly positive finite number, got {v}"));
            }
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(format!("volume must be non-negative and finite, got {volume}"));
        }
        if low > open.min(close) {
            return Err(format!("low {low} exceeds min(open, close) = {}", open.min(close)));
        }
        if high < open.max(close) {
            return Err(format!("high {high} is below max(open, close) = {}", open.max(close)));
        }
        Ok(Self { timestamp, open, high, low, close, volume })
    }

    /// UTC calendar date of the bar open.
    pub fn date(&self) -> NaiveDate {
        chrono::DateTime::from_timestamp(self.timestamp, 0)
            .expect("validated epoch timestamp")
            .date_naive()
    }
}

/// A gap-free, strictly ascending series of daily candles for one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    pub asset: String,
    /// Bar duration in seconds; fixed at one day.
    pub interval_secs: i64,
    bars: Vec<Candle>,
}

impl CandleSeries {
    /// Builds a series from bars, sorting by timestamp and enforcing the
    /// no-duplicate and no-gap invariants.
    pub fn new(asset: impl Into<String>, mut bars: Vec<Candle>) -> Result<Self, MarketDataError> {
        if bars.is_empty() {
            return Err(MarketDataError::Empty);
        }
        bars.sort_by_key(|b| b.timestamp);
        for pair in bars.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.timestamp == a.timestamp {
                return Err(MarketDataError::DuplicateTimestamp { timestamp: a.timestamp, line: 0 });
            }
            if b.timestamp - a.timestamp != DAY_SECONDS {
                return Err(MarketDataError::Gap {
                    expected: a.timestamp + DAY_SECONDS,
                    found: b.timestamp,
                });
            }
        }
        Ok(Self { asset: asset.into(), interval_secs: DAY_SECONDS, bars })
    }

    pub fn bars(&self) -> &[Candle] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Index of the bar whose UTC date equals `date`, if present.
    pub fn index_of_date(&self, date: NaiveDate) -> Option<usize> {
        let target = date.and_hms_opt(0, 0, 0)?.and_utc().timestamp();
        let first = self.bars.first()?.timestamp;
        let day0 = first - first.rem_euclid(DAY_SECONDS);
        let offset = (target - day0) / DAY_SECONDS;
        if offset < 0 || offset as usize >= self.bars.len() {
            return None;
        }
        let idx = offset as usize;
        (self.bars[idx].date() == date).then_some(idx)
    }
}

/// Prediction horizon with its labeling tolerance band (percent return).
///
/// Only the three calibrated horizons exist; the band magnitudes differ per
/// horizon (tighter for 1d sensitivity, wider for 7d noise suppression).
/// Serializes as its day count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizon {
    OneDay,
    SevenDay,
    FifteenDay,
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u32(self.days())
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let days = u32::deserialize(deserializer)?;
        Horizon::from_days(days).map_err(serde::de::Error::custom)
    }
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::OneDay, Horizon::SevenDay, Horizon::FifteenDay];

    pub fn from_days(days: u32) -> Result<Self, MarketDataError> {
        match days {
            1 => Ok(Horizon::OneDay),
            7 => Ok(Horizon::SevenDay),
            15 => Ok(Horizon::FifteenDay),
            other => Err(MarketDataError::UnsupportedHorizon(other)),
        }
    }

    pub fn days(self) -> u32 {
        match self {
            Horizon::OneDay => 1,
            Horizon::SevenDay => 7,
            Horizon::FifteenDay => 15,
        }
    }

    /// Upper band edge in percent; returns above it label `Up`.
    pub fn up_threshold_pct(self) -> f64 {
        match self {
            Horizon::OneDay => 0.30,
            Horizon::SevenDay => 0.60,
            Horizon::FifteenDay => 0.40,
        }
    }

    /// Lower band edge in percent; returns below it label `Down`.
    pub fn down_threshold_pct(self) -> f64 {
        -self.up_threshold_pct()
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}d", self.days())
    }
}

/// Three-way trend class. There is deliberately no fourth state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrendClass {
    Up,
    Down,
    Sideways,
}

impl TrendClass {
    /// Fixed class order used by confusion matrices and reports.
    pub const ALL: [TrendClass; 3] = [TrendClass::Up, TrendClass::Down, TrendClass::Sideways];

    pub fn index(self) -> usize {
        match self {
            TrendClass::Up => 0,
            TrendClass::Down => 1,
            TrendClass::Sideways => 2,
        }
    }
}

impl fmt::Display for TrendClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrendClass::Up => "Up",
            TrendClass::Down => "Down",
            TrendClass::Sideways => "Sideways",
        };
        write!(f, "{s}")
    }
}

pub const CSV_HEADER: &str = "timestamp,open,high,low,close,volume";

/// Parses the OHLCV CSV format into a validated series.
///
/// Rows may arrive out of order; the result is sorted ascending. Errors carry
/// the 1-based line number of the offending row.
pub fn parse_candles(reader: impl BufRead, asset: &str) -> Result<CandleSeries, MarketDataError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(MarketDataError::Empty),
    };
    if header.trim_end_matches('\r').trim() != CSV_HEADER {
        return Err(MarketDataError::BadHeader {
            expected: CSV_HEADER.to_string(),
            found: header.trim().to_string(),
        });
    }

    // (candle, source line) so duplicate reporting survives the sort
    let mut rows: Vec<(Candle, usize)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let text = line.trim_end_matches('\r').trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 6 {
            return Err(MarketDataError::MalformedRow {
                line: line_no,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let timestamp: i64 = fields[0].trim().parse().map_err(|e| MarketDataError::MalformedRow {
            line: line_no,
            reason: format!("timestamp `{}`: {e}", fields[0]),
        })?;
        let mut nums = [0.0f64; 5];
        for (slot, (name, raw)) in nums.iter_mut().zip(
            ["open", "high", "low", "close", "volume"].iter().zip(&fields[1..]),
        ) {
            *slot = raw.trim().parse().map_err(|e| MarketDataError::MalformedRow {
                line: line_no,
                reason: format!("{name} `{raw}`: {e}"),
            })?;
        }
        let candle = Candle::new(timestamp, nums[0], nums[1], nums[2], nums[3], nums[4])
            .map_err(|reason| MarketDataError::InvalidCandle { line: line_no, reason })?;
        rows.push((candle, line_no));
    }

    if rows.is_empty() {
        return Err(MarketDataError::Empty);
    }
    rows.sort_by_key(|(c, _)| c.timestamp);
    for pair in rows.windows(2) {
        if pair[1].0.timestamp == pair[0].0.timestamp {
            return Err(MarketDataError::DuplicateTimestamp {
                timestamp: pair[1].0.timestamp,
                line: pair[1].1,
            });
        }
    }
    CandleSeries::new(asset, rows.into_iter().map(|(c, _)| c).collect())
}

/// Serializes a series back to the CSV wire format (used by fixtures).
pub fn write_candles(series: &CandleSeries) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for bar in series.bars() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            bar.timestamp, bar.open, bar.high, bar.low, bar.close, bar.volume
        ));
    }
    out
}

/// Percent return from bar `t` to bar `t + h.days()`.
pub fn forward_return(series: &CandleSeries, t: usize, h: Horizon) -> Result<f64, MarketDataError> {
    let end = t + h.days() as usize;
    let bars = series.bars();
    if t >= bars.len() || end >= bars.len() {
        return Err(MarketDataError::HorizonOutOfRange {
            index: t,
            horizon_days: h.days(),
            len: bars.len(),
        });
    }
    Ok(100.0 * (bars[end].close - bars[t].close) / bars[t].close)
}

/// Maps a percent return to a trend class using the horizon's band.
/// Band edges label `Sideways`.
pub fn label_return(ret_pct: f64, h: Horizon) -> TrendClass {
    if ret_pct > h.up_threshold_pct() {
        TrendClass::Up
    } else if ret_pct < h.down_threshold_pct() {
        TrendClass::Down
    } else {
        TrendClass::Sideways
    }
}
