//! The five technical indicators and their aggregation into one signal.
//!
//! Indicator vectors are aligned to the input: every function returns one
//! value per input bar, with `f64::NAN` marking the warmup prefix where the
//! indicator is not yet defined. EMA and MACD are defined from the first bar
//! (the EMA is seeded with the first close); RSI needs `period` deltas, KDJ
//! and Bollinger need a full rolling window.
//!
//! Conventions fixed here so results are reproducible:
//! - RSI uses Wilder smoothing: the first average gain/loss is a simple mean
//!   over the first `period` deltas, then `avg = (avg * (period - 1) + x) / period`.
//!   A window with zero gains and zero losses yields RSI 50.
//! - KDJ: `K` is the raw stochastic from the rolling high/low window (a
//!   degenerate window with high == low yields K = 50), `D` is a 3-bar simple
//!   moving average of `K` (expanding while fewer than 3 values exist), and
//!   `J = 3K - 2D`.
//! - Bollinger Bands use the population standard deviation.
//! - Realized volatility is the un-annualized population standard deviation
//!   of one-bar log returns over a trailing window.
//!
//! The aggregated signal `s_technical` is the mean of five ternary votes
//! (one per indicator), so it always lands on a multiple of 0.2 in [-1, 1].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::CandleSeries;

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("empty input series")]
    EmptyInput,
    #[error("invalid period {period} for {indicator}: {reason}")]
    InvalidPeriod {
        indicator: &'static str,
        period: usize,
        reason: &'static str,
    },
    #[error("{indicator} needs at least {needed} bars, got {got}")]
    InsufficientData {
        indicator: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("bollinger width must be non-negative and finite, got {0}")]
    InvalidWidth(f64),
}

/// Periods and widths for the indicator suite. Defaults are the canonical
/// parameterizations; all are overridable through the run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    pub ema_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub rsi_period: usize,
    pub kdj_period: usize,
    pub bb_period: usize,
    pub bb_width: f64,
    /// Trailing window for realized volatility (log-return std).
    pub volatility_window: usize,
}

impl Default for IndicatorParams {
    fn default() -> Self {
        Self {
            ema_period: 20,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            rsi_period: 14,
            kdj_period: 9,
            bb_period: 20,
            bb_width: 2.0,
            volatility_window: 14,
        }
    }
}

impl IndicatorParams {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let checks = [
            ("ema", self.ema_period),
            ("macd fast", self.macd_fast),
            ("macd slow", self.macd_slow),
            ("macd signal", self.macd_signal),
            ("rsi", self.rsi_period),
            ("kdj", self.kdj_period),
            ("bollinger", self.bb_period),
            ("volatility", self.volatility_window),
        ];
        for (indicator, period) in checks {
            if period < 2 {
                return Err(IndicatorError::InvalidPeriod {
                    indicator,
                    period,
                    reason: "periods must be at least 2",
                });
            }
        }
        if self.macd_fast >= self.macd_slow {
            return Err(IndicatorError::InvalidPeriod {
                indicator: "macd",
                period: self.macd_fast,
                reason: "fast period must be smaller than slow period",
            });
        }
        if !self.bb_width.is_finite() || self.bb_width < 0.0 {
            return Err(IndicatorError::InvalidWidth(self.bb_width));
        }
        Ok(())
    }

    /// First bar index at which every indicator (and therefore a snapshot)
    /// is defined.
    pub fn snapshot_warmup(&self) -> usize {
        self.rsi_period
            .max(self.kdj_period - 1)
            .max(self.bb_period - 1)
    }
}

/// Exponential moving average seeded with the first value,
/// multiplier `2 / (period + 1)`. Output length equals input length.
pub fn ema(values: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if values.is_empty() {
        return Err(IndicatorError::EmptyInput);
    }
    if period < 2 {
        return Err(IndicatorError::InvalidPeriod {
            indicator: "ema",
            period,
            reason: "period must be at least 2",
        });
    }
    let k = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0];
    out.push(prev);
    for &v in &values[1..] {
        prev += k * (v - prev);
        out.push(prev);
    }
    Ok(out)
}

/// MACD line, signal line, and histogram.
pub fn macd(
    closes: &[f64],
    fast: usize,
    slow: usize,
    signal: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), IndicatorError> {
    if fast >= slow {
        return Err(IndicatorError::InvalidPeriod {
            indicator: "macd",
            period: fast,
            reason: "fast period must be smaller than slow period",
        });
    }
    if closes.len() < slow {
        return Err(IndicatorError::InsufficientData {
            indicator: "macd",
            needed: slow,
            got: closes.len(),
        });
    }
    let fast_ema = ema(closes, fast)?;
    let slow_ema = ema(closes, slow)?;
    let line: Vec<f64> = fast_ema.iter().zip(&slow_ema).map(|(f, s)| f - s).collect();
    let signal_line = ema(&line, signal)?;
    let histogram: Vec<f64> = line.iter().zip(&signal_line).map(|(l, s)| l - s).collect();
    Ok((line, signal_line, histogram))
}

/// Relative strength index with Wilder smoothing, in [0, 100].
/// Defined from index `period` onward; earlier entries are NaN.
pub fn rsi(closes: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period < 2 {
        return Err(IndicatorError::InvalidPeriod {
            indicator: "rsi",
            period,
            reason: "period must be at least 2",
        });
    }
    if closes.len() < period + 1 {
        return Err(IndicatorError::InsufficientData {
            indicator: "rsi",
            needed: period + 1,
            got: closes.len(),
        });
    }
    let mut out = vec![f64::NAN; closes.len()];
    let mut avg_gain = 0.0;
    let mut avg_loss = 0.0;
    for i in 1..=period {
        let delta = closes[i] - closes[i - 1];
        if delta > 0.0 {
            avg_gain += delta;
        } else {
            avg_loss -= delta;
        }
    }
    avg_gain /= period as f64;
    avg_loss /= period as f64;
    out[period] = rsi_from_averages(avg_gain, avg_loss);
    for i in period + 1..closes.len() {
        let delta = closes[i] - closes[i - 1];
        let (gain, loss) = if delta > 0.0 { (delta, 0.0) } else { (0.0, -delta) };
        avg_gain = (avg_gain * (period as f64 - 1.0) + gain) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + loss) / period as f64;
        out[i] = rsi_from_averages(avg_gain, avg_loss);
    }
    Ok(out)
}

fn rsi_from_averages(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 && avg_gain == 0.0 {
        50.0
    } else if avg_loss == 0.0 {
        100.0
    } else {
        let rs = avg_gain / avg_loss;
        100.0 - 100.0 / (1.0 + rs)
    }
}

/// Stochastic K/D/J from candle highs and lows.
/// Defined from index `period - 1` onward; earlier entries are NaN.
pub fn kdj(
    series: &CandleSeries,
    period: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), IndicatorError> {
    if period < 2 {
        return Err(IndicatorError::InvalidPeriod {
            indicator: "kdj",
            period,
            reason: "period must be at least 2",
        });
    }
    let bars = series.bars();
    if bars.len() < period {
        return Err(IndicatorError::InsufficientData {
            indicator: "kdj",
            needed: period,
            got: bars.len(),
        });
    }
    let n = bars.len();
    let mut k = vec![f64::NAN; n];
    let mut d = vec![f64::NAN; n];
    let mut j = vec![f64::NAN; n];
    for t in period - 1..n {
        let window = &bars[t + 1 - period..=t];
        let hh = window.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let ll = window.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        k[t] = if hh == ll {
            50.0
        } else {
            100.0 * (bars[t].close - ll) / (hh - ll)
        };
        // simple 3-bar mean of K, expanding while fewer than 3 values exist
        let d_start = (period - 1).max(t.saturating_sub(2));
        let window = &k[d_start..=t];
        d[t] = window.iter().sum::<f64>() / window.len() as f64;
        j[t] = 3.0 * k[t] - 2.0 * d[t];
    }
    Ok((k, d, j))
}

/// Bollinger mid/upper/lower bands (rolling mean ± width × population std).
/// Defined from index `period - 1` onward; earlier entries are NaN.
pub fn bollinger(
    closes: &[f64],
    period: usize,
    width: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), IndicatorError> {
    if period < 2 {
        return Err(IndicatorError::InvalidPeriod {
            indicator: "bollinger",
            period,
            reason: "period must be at least 2",
        });
    }
    if !width.is_finite() || width < 0.0 {
        return Err(IndicatorError::InvalidWidth(width));
    }
    if closes.len() < period {
        return Err(IndicatorError::InsufficientData {
            indicator: "bollinger",
            needed: period,
            got: closes.len(),
        });
    }
    let n = closes.len();
    let mut mid = vec![f64::NAN; n];
    let mut upper = vec![f64::NAN; n];
    let mut lower = vec![f64::NAN; n];
    for t in period - 1..n {
        let window = &closes[t + 1 - period..=t];
        let mean = window.iter().sum::<f64>() / period as f64;
        let var = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / period as f64;
        let sd = var.sqrt();
        mid[t] = mean;
        upper[t] = mean + width * sd;
        lower[t] = mean - width * sd;
    }
    Ok((mid, upper, lower))
}

/// Population standard deviation of the last `window` one-bar log returns.
pub fn realized_volatility(closes: &[f64], window: usize) -> Result<f64, IndicatorError> {
    if closes.len() < window + 1 {
        return Err(IndicatorError::InsufficientData {
            indicator: "realized volatility",
            needed: window + 1,
            got: closes.len(),
        });
    }
    let start = closes.len() - window - 1;
    let returns: Vec<f64> = closes[start..]
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let mean = returns.iter().sum::<f64>() / window as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / window as f64;
    Ok(var.sqrt())
}

/// Per-bar realized volatility over the whole series; NaN before the first
/// index with a full trailing window.
pub fn rolling_volatility(closes: &[f64], window: usize) -> Result<Vec<f64>, IndicatorError> {
    if closes.len() < window + 1 {
        return Err(IndicatorError::InsufficientData {
            indicator: "realized volatility",
            needed: window + 1,
            got: closes.len(),
        });
    }
    let mut out = vec![f64::NAN; closes.len()];
    for t in window..closes.len() {
        out[t] = realized_volatility(&closes[..=t], window)?;
    }
    Ok(out)
}

/// Per-bar values of all five indicators plus the aggregated signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnicalSnapshot {
    pub close: f64,
    pub ema: f64,
    pub macd_line: f64,
    pub macd_signal_line: f64,
    pub macd_histogram: f64,
    pub rsi: f64,
    pub kdj_k: f64,
    pub kdj_d: f64,
    pub kdj_j: f64,
    pub bb_mid: f64,
    pub bb_upper: f64,
    pub bb_lower: f64,
    pub s_technical: f64,
}

impl TechnicalSnapshot {
    /// The five ternary votes, in indicator order (EMA, MACD, RSI, KDJ, BB).
    pub fn votes(&self) -> [i8; 5] {
        let sign = |x: f64| {
            if x > 0.0 {
                1
            } else if x < 0.0 {
                -1
            } else {
                0
            }
        };
        let rsi_vote = if self.rsi < 30.0 {
            1
        } else if self.rsi > 70.0 {
            -1
        } else {
            0
        };
        let bb_vote = if self.close < self.bb_lower {
            1
        } else if self.close > self.bb_upper {
            -1
        } else {
            0
        };
        [
            sign(self.close - self.ema),
            sign(self.macd_histogram),
            rsi_vote,
            sign(self.kdj_k - self.kdj_d),
            bb_vote,
        ]
    }
}

/// Mean of the five ternary votes; always a multiple of 0.2 in [-1, 1].
pub fn technical_signal(snapshot: &TechnicalSnapshot) -> f64 {
    let votes = snapshot.votes();
    votes.iter().map(|&v| v as f64).sum::<f64>() / votes.len() as f64
}

/// Computes a snapshot for every bar; `None` during warmup. The series must
/// be long enough for every indicator (in particular, at least `macd_slow`
/// and `rsi_period + 1` bars).
pub fn compute_snapshots(
    series: &CandleSeries,
    params: &IndicatorParams,
) -> Result<Vec<Option<TechnicalSnapshot>>, IndicatorError> {
    params.validate()?;
    let closes = series.closes();
    let needed = params
        .macd_slow
        .max(params.rsi_period + 1)
        .max(params.kdj_period)
        .max(params.bb_period);
    if closes.len() < needed {
        return Err(IndicatorError::InsufficientData {
            indicator: "snapshot",
            needed,
            got: closes.len(),
        });
    }

    let ema_line = ema(&closes, params.ema_period)?;
    let (macd_line, signal_line, histogram) =
        macd(&closes, params.macd_fast, params.macd_slow, params.macd_signal)?;
    let rsi_line = rsi(&closes, params.rsi_period)?;
    let (k, d, j) = kdj(series, params.kdj_period)?;
    let (mid, upper, lower) = bollinger(&closes, params.bb_period, params.bb_width)?;

    let warmup = params.snapshot_warmup();
    let out = (0..closes.len())
        .map(|t| {
            if t < warmup {
                return None;
            }
            let mut snap = TechnicalSnapshot {
                close: closes[t],
                ema: ema_line[t],
                macd_line: macd_line[t],
                macd_signal_line: signal_line[t],
                macd_histogram: histogram[t],
                rsi: rsi_line[t],
                kdj_k: k[t],
                kdj_d: d[t],
                kdj_j: j[t],
                bb_mid: mid[t],
                bb_upper: upper[t],
                bb_lower: lower[t],
                s_technical: 0.0,
            };
            snap.s_technical = technical_signal(&snap);
            Some(snap)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{Candle, DAY_SECONDS};
    use proptest::prelude::*;

    fn flat_series(closes: &[f64]) -> CandleSeries {
        let bars: Vec<Candle> = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Candle::new(i as i64 * DAY_SECONDS, c, c, c, c, 1.0).unwrap())
            .collect();
        CandleSeries::new("TST", bars).unwrap()
    }

    fn ohlc_series(rows: &[(f64, f64, f64, f64)]) -> CandleSeries {
        let bars: Vec<Candle> = rows
            .iter()
            .enumerate()
            .map(|(i, &(o, h, l, c))| Candle::new(i as i64 * DAY_SECONDS, o, h, l, c, 1.0).unwrap())
            .collect();
        CandleSeries::new("TST", bars).unwrap()
    }

    #[test]
    fn ema_constant_series_is_fixed_point() {
        let out = ema(&[100.0, 100.0, 100.0], 5).unwrap();
        assert_eq!(out, vec![100.0, 100.0, 100.0]);
    }

    #[test]
    fn ema_two_points_hand_oracle() {
        // 10 + (2/4)(20 - 10) = 15
        let out = ema(&[10.0, 20.0], 3).unwrap();
        assert_eq!(out, vec![10.0, 15.0]);
    }

    #[test]
    fn ema_single_element_is_seed() {
        assert_eq!(ema(&[42.0], 7).unwrap(), vec![42.0]);
    }

    #[test]
    fn ema_rejects_empty_and_bad_period() {
        assert!(matches!(ema(&[], 3), Err(IndicatorError::EmptyInput)));
        assert!(matches!(ema(&[1.0], 1), Err(IndicatorError::InvalidPeriod { .. })));
    }

    #[test]
    fn macd_constant_series_is_zero() {
        let closes = vec![50.0; 30];
        let (line, signal, hist) = macd(&closes, 12, 26, 9).unwrap();
        assert!(line.iter().all(|&x| x == 0.0));
        assert!(signal.iter().all(|&x| x == 0.0));
        assert!(hist.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn macd_linear_uptrend_turns_positive() {
        let closes: Vec<f64> = (0..60).map(|i| 100.0 + i as f64).collect();
        let (line, _, _) = macd(&closes, 12, 26, 9).unwrap();
        assert!(*line.last().unwrap() > 0.0);
    }

    #[test]
    fn macd_too_short_errors() {
        let closes = vec![1.0; 25];
        assert!(matches!(
            macd(&closes, 12, 26, 9),
            Err(IndicatorError::InsufficientData { .. })
        ));
    }

    #[test]
    fn rsi_all_gains_is_100() {
        let closes: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let out = rsi(&closes, 14).unwrap();
        for (i, v) in out.iter().enumerate() {
            if i >= 14 {
                assert_eq!(*v, 100.0, "index {i}");
            } else {
                assert!(v.is_nan());
            }
        }
    }

    #[test]
    fn rsi_all_losses_is_0() {
        let closes: Vec<f64> = (1..=30).rev().map(|i| i as f64 + 100.0).collect();
        let out = rsi(&closes, 14).unwrap();
        assert!(out.iter().skip(14).all(|&v| v == 0.0));
    }

    #[test]
    fn rsi_alternating_equal_ticks_starts_at_50() {
        // +1/-1 alternating; the seed window holds 7 gains and 7 losses of
        // equal size, so average gain equals average loss at the first
        // defined point.
        let mut closes = vec![100.0];
        for i in 0..40 {
            let last = *closes.last().unwrap();
            closes.push(if i % 2 == 0 { last + 1.0 } else { last - 1.0 });
        }
        let out = rsi(&closes, 14).unwrap();
        assert_eq!(out[14], 50.0);
        // Wilder smoothing then oscillates around the midpoint
        assert!(out.iter().skip(14).all(|&v| (40.0..=60.0).contains(&v)));
    }

    #[test]
    fn rsi_flat_series_is_neutral() {
        let out = rsi(&[5.0; 20], 14).unwrap();
        assert!(out.iter().skip(14).all(|&v| v == 50.0));
    }

    #[test]
    fn rsi_too_short_errors() {
        assert!(matches!(
            rsi(&[1.0; 14], 14),
            Err(IndicatorError::InsufficientData { .. })
        ));
    }

    #[test]
    fn kdj_close_at_rolling_max_is_100() {
        let series = ohlc_series(&[
            (10.0, 11.0, 9.0, 10.5),
            (10.5, 12.0, 10.0, 11.0),
            (11.0, 13.0, 10.5, 13.0), // close == rolling high
        ]);
        let (k, _, _) = kdj(&series, 3).unwrap();
        assert_eq!(k[2], 100.0);
    }

    #[test]
    fn kdj_flat_series_is_all_50() {
        let series = flat_series(&[7.0; 10]);
        let (k, d, j) = kdj(&series, 9).unwrap();
        for t in 8..10 {
            assert_eq!(k[t], 50.0);
            assert_eq!(d[t], 50.0);
            assert_eq!(j[t], 50.0);
        }
    }

    #[test]
    fn kdj_two_bar_window_midrange_close_is_50() {
        // window max high 12, min low 8, close 10 -> K = 100 * 2/4 = 50
        let series = ohlc_series(&[
            (10.0, 10.0, 10.0, 10.0),
            (10.0, 12.0, 8.0, 10.0),
            (10.0, 12.0, 8.0, 10.0),
        ]);
        let (k, _, _) = kdj(&series, 2).unwrap();
        assert_eq!(k[1], 50.0);
        assert_eq!(k[2], 50.0);
    }

    #[test]
    fn kdj_too_short_errors() {
        let series = flat_series(&[1.0; 5]);
        assert!(matches!(
            kdj(&series, 9),
            Err(IndicatorError::InsufficientData { .. })
        ));
    }

    #[test]
    fn bollinger_constant_series_collapses() {
        let (mid, upper, lower) = bollinger(&[4.0; 10], 5, 2.0).unwrap();
        for t in 4..10 {
            assert_eq!(mid[t], 4.0);
            assert_eq!(upper[t], 4.0);
            assert_eq!(lower[t], 4.0);
        }
    }

    #[test]
    fn bollinger_three_bar_hand_oracle() {
        // mean 2, population variance ((1)^2 + 0 + 1^2)/3 = 2/3
        let (mid, upper, lower) = bollinger(&[1.0, 2.0, 3.0], 3, 2.0).unwrap();
        let sigma = (2.0f64 / 3.0).sqrt();
        assert!((mid[2] - 2.0).abs() < 1e-12);
        assert!((upper[2] - (2.0 + 2.0 * sigma)).abs() < 1e-12);
        assert!((lower[2] - (2.0 - 2.0 * sigma)).abs() < 1e-12);
    }

    #[test]
    fn bollinger_zero_width_collapses_to_mid() {
        let (mid, upper, lower) = bollinger(&[1.0, 5.0, 3.0, 2.0], 3, 0.0).unwrap();
        for t in 2..4 {
            assert_eq!(upper[t], mid[t]);
            assert_eq!(lower[t], mid[t]);
        }
    }

    #[test]
    fn realized_volatility_constant_is_zero() {
        assert_eq!(realized_volatility(&[3.0; 20], 14).unwrap(), 0.0);
    }

    #[test]
    fn realized_volatility_alternating_doubling_is_ln2() {
        // log returns alternate +ln2 / -ln2; mean 0, population std = ln2
        let mut closes = vec![100.0];
        for i in 0..14 {
            let last = *closes.last().unwrap();
            closes.push(if i % 2 == 0 { last * 2.0 } else { last * 0.5 });
        }
        let vol = realized_volatility(&closes, 14).unwrap();
        assert!((vol - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn realized_volatility_window_too_long_errors() {
        assert!(matches!(
            realized_volatility(&[1.0; 10], 14),
            Err(IndicatorError::InsufficientData { .. })
        ));
    }

    #[test]
    fn technical_signal_unanimous_votes() {
        let snap = TechnicalSnapshot {
            close: 100.0,
            ema: 90.0,           // +1
            macd_line: 1.0,
            macd_signal_line: 0.0,
            macd_histogram: 1.0, // +1
            rsi: 20.0,           // +1 (oversold)
            kdj_k: 60.0,
            kdj_d: 40.0,         // +1
            kdj_j: 100.0,
            bb_mid: 110.0,
            bb_upper: 120.0,
            bb_lower: 105.0,     // close below lower: +1
            s_technical: 0.0,
        };
        assert_eq!(technical_signal(&snap), 1.0);
    }

    #[test]
    fn technical_signal_mixed_votes() {
        // votes (+1, +1, 0, 0, -1) -> mean +0.2
        let snap = TechnicalSnapshot {
            close: 100.0,
            ema: 90.0,           // +1
            macd_line: 1.0,
            macd_signal_line: 0.0,
            macd_histogram: 1.0, // +1
            rsi: 50.0,           // 0
            kdj_k: 50.0,
            kdj_d: 50.0,         // 0
            kdj_j: 50.0,
            bb_mid: 95.0,
            bb_upper: 99.0,      // close above upper: -1
            bb_lower: 91.0,
            s_technical: 0.0,
        };
        assert_eq!(snap.votes(), [1, 1, 0, 0, -1]);
        assert!((technical_signal(&snap) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn technical_signal_all_neutral() {
        let snap = TechnicalSnapshot {
            close: 100.0,
            ema: 100.0,
            macd_line: 0.0,
            macd_signal_line: 0.0,
            macd_histogram: 0.0,
            rsi: 50.0,
            kdj_k: 50.0,
            kdj_d: 50.0,
            kdj_j: 50.0,
            bb_mid: 100.0,
            bb_upper: 101.0,
            bb_lower: 99.0,
            s_technical: 0.0,
        };
        assert_eq!(technical_signal(&snap), 0.0);
    }

    #[test]
    fn snapshots_have_warmup_prefix_and_band_order() {
        let closes: Vec<f64> = (0..60).map(|i| 100.0 + (i as f64 * 0.7).sin() * 5.0).collect();
        let series = flat_series(&closes);
        let params = IndicatorParams::default();
        let snaps = compute_snapshots(&series, &params).unwrap();
        assert_eq!(snaps.len(), 60);
        let warmup = params.snapshot_warmup();
        for (t, snap) in snaps.iter().enumerate() {
            if t < warmup {
                assert!(snap.is_none(), "expected warmup None at {t}");
            } else {
                let s = snap.as_ref().expect("defined after warmup");
                assert!(s.bb_lower <= s.bb_mid && s.bb_mid <= s.bb_upper);
                assert!((0.0..=100.0).contains(&s.rsi));
                assert!((-1.0..=1.0).contains(&s.s_technical));
            }
        }
    }

    fn random_walk_series(seed: u64, n: usize) -> CandleSeries {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut close = 100.0f64;
        let mut bars = Vec::with_capacity(n);
        for i in 0..n {
            let open = close;
            close *= 1.0 + rng.gen_range(-0.03..0.03);
            let high = open.max(close) * (1.0 + rng.gen_range(0.0..0.01));
            let low = open.min(close) * (1.0 - rng.gen_range(0.0..0.01));
            let volume = rng.gen_range(0.0..1000.0);
            bars.push(
                Candle::new(i as i64 * DAY_SECONDS, open, high, low, close, volume).unwrap(),
            );
        }
        CandleSeries::new("TST", bars).unwrap()
    }

    /// Multiplying all prices by a positive constant leaves RSI, KDJ, and all
    /// five votes unchanged. Powers of two make the scaling exact in floats.
    #[test]
    fn votes_are_scale_invariant() {
        let series = random_walk_series(7, 120);
        let params = IndicatorParams::default();
        let base = compute_snapshots(&series, &params).unwrap();
        for scale in [0.25f64, 2048.0] {
            let scaled_bars: Vec<Candle> = series
                .bars()
                .iter()
                .map(|b| {
                    Candle::new(
                        b.timestamp,
                        b.open * scale,
                        b.high * scale,
                        b.low * scale,
                        b.close * scale,
                        b.volume,
                    )
                    .unwrap()
                })
                .collect();
            let scaled = compute_snapshots(
                &CandleSeries::new("TST", scaled_bars).unwrap(),
                &params,
            )
            .unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                match (a, b) {
                    (None, None) => {}
                    (Some(a), Some(b)) => {
                        assert_eq!(a.votes(), b.votes());
                        assert_eq!(a.rsi, b.rsi);
                        assert_eq!(a.kdj_k, b.kdj_k);
                        assert_eq!(a.s_technical, b.s_technical);
                    }
                    _ => panic!("warmup mismatch"),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn s_technical_is_multiple_of_point_two(seed in 0u64..500) {
            let series = random_walk_series(seed, 40);
            let snaps = compute_snapshots(&series, &IndicatorParams::default()).unwrap();
            for snap in snaps.into_iter().flatten() {
                let scaled = snap.s_technical * 5.0;
                prop_assert!((scaled - scaled.round()).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&snap.s_technical));
            }
        }

        #[test]
        fn bollinger_band_order_any_width(width in 0.0f64..5.0, seed in 0u64..100) {
            let series = random_walk_series(seed, 30);
            let closes = series.closes();
            let (mid, upper, lower) = bollinger(&closes, 10, width).unwrap();
            for t in 9..closes.len() {
                prop_assert!(lower[t] <= mid[t] && mid[t] <= upper[t]);
            }
        }
    }
}
