//! News-technical fusion engine for cryptocurrency trend prediction.
//!
//! The crate is organized around a daily backtest pipeline:
//!
//! - [`market_data`] ingests and validates OHLCV candle series and produces
//!   three-class ground-truth labels per prediction horizon.
//! - [`indicators`] computes EMA, MACD, RSI, KDJ, and Bollinger Bands and
//!   folds them into a single technical signal in `[-1, 1]`.
//! - [`news`] scores articles on seven weighted dimensions, bridges the
//!   composite to a signed sentiment, and provides the keyword baseline
//!   scorer used for comparison and as the fault-tolerance fallback.
//! - [`gateway`] abstracts the scoring backend: prompt rendering, response
//!   parsing with clamping, retry policy, an HTTP client, and a
//!   deterministic mock for reproducible runs.
//! - [`fusion`] detects the volatility regime, picks the news weight, fuses
//!   news and technical signals, and classifies the result.
//! - [`coordination`] runs the multi-agent pipeline: asset tracking, parallel
//!   news scoring with bounded retries and baseline fallback, and a
//!   prediction agent, all exchanging typed messages over an in-process bus.
//! - [`evaluation`] computes confusion matrices, accuracy, macro-F1, and
//!   balanced accuracy, and renders per-horizon system comparisons.
//! - [`synthetic`] generates deterministic candle/corpus fixtures for tests
//!   and benchmarks.

pub mod coordination;
pub mod evaluation;
pub mod fusion;
pub mod gateway;
pub mod indicators;
pub mod market_data;
pub mod news;
pub mod synthetic;

pub use fusion::Prediction;
pub use market_data::{Candle, CandleSeries, Horizon, TrendClass};
pub use news::{DimensionScores, NewsArticle, ScoreOrigin, SentimentScore};
