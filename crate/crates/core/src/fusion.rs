//! Volatility regime detection, news/technical fusion, and trend
//! classification.
//!
//! The fused score is the convex combination
//! `p_final = alpha * s_news + (1 - alpha) * s_technical`, where `alpha` is
//! the news weight chosen per volatility regime: the normal-regime anchor is
//! 80/20 in favor of news, rising when volatility runs hot (news leads price
//! discovery in turbulent markets) and falling when the market is quiet.
//! With `alpha >= 0.5`, a news signal that is larger in magnitude than the
//! technical signal always determines the sign of the fused score, which is
//! the observable form of the news-over-technical priority rule; residual
//! disagreements between the two channels are recorded as audit notes rather
//! than overriding the arithmetic.
//!
//! Regimes come from comparing current realized volatility against the
//! nearest-rank 25th/75th percentiles of its own trailing history, so the
//! rule is scale-free.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{Horizon, TrendClass};
use crate::news::ScoreOrigin;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("volatility history is empty")]
    EmptyHistory,
    #[error("{name} value {value} outside {range}")]
    DomainViolation {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Coarse volatility state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    HighVolatility,
    Normal,
    LowVolatility,
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegimeKind::HighVolatility => "high-volatility",
            RegimeKind::Normal => "normal",
            RegimeKind::LowVolatility => "low-volatility",
        };
        write!(f, "{s}")
    }
}

/// A regime decision together with the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// The realized volatility that was classified.
    pub vol_value: f64,
    /// Nearest-rank 25th percentile of the trailing history.
    pub low_threshold: f64,
    /// Nearest-rank 75th percentile of the trailing history.
    pub high_threshold: f64,
}

/// Trailing observations considered by [`detect_regime`].
pub const REGIME_HISTORY_WINDOW: usize = 90;

fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// Classifies `vol` against the trailing history (last
/// [`REGIME_HISTORY_WINDOW`] observations, or all if fewer): above the 75th
/// percentile is high volatility, below the 25th is low, otherwise normal.
/// Both comparisons are strict, so a volatility equal to its entire history
/// is normal.
pub fn detect_regime(vol: f64, history: &[f64]) -> Result<Regime, FusionError> {
    if history.is_empty() {
        return Err(FusionError::EmptyHistory);
    }
    let trailing = &history[history.len().saturating_sub(REGIME_HISTORY_WINDOW)..];
    let mut sorted = trailing.to_vec();
    sorted.sort_by(f64::total_cmp);
    let low_threshold = nearest_rank(&sorted, 25.0);
    let high_threshold = nearest_rank(&sorted, 75.0);
    let kind = if vol > high_threshold {
        RegimeKind::HighVolatility
    } else if vol < low_threshold {
        RegimeKind::LowVolatility
    } else {
        RegimeKind::Normal
    };
    Ok(Regime { kind, vol_value: vol, low_threshold, high_threshold })
}

/// News weight per regime. The normal anchor is 0.80; the high/low values
/// are configurable defaults that only shift the balance in the direction
/// the regime calls for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTable {
    pub normal: f64,
    pub high_volatility: f64,
    pub low_volatility: f64,
}

impl Default for AlphaTable {
    fn default() -> Self {
        Self { normal: 0.80, high_volatility: 0.90, low_volatility: 0.65 }
    }
}

impl AlphaTable {
    pub fn validate(&self) -> Result<(), FusionError> {
        for (name, v) in [
            ("alpha_normal", self.normal),
            ("alpha_high_volatility", self.high_volatility),
            ("alpha_low_volatility", self.low_volatility),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(FusionError::DomainViolation { name, value: v, range: "[0, 1]" });
            }
        }
        Ok(())
    }
}

/// The chosen news weight and the regime that selected it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub regime: Regime,
}

/// Looks up the news weight for a regime.
pub fn alpha_for(regime: Regime, table: &AlphaTable) -> FusionWeights {
    let alpha = match regime.kind {
        RegimeKind::Normal => table.normal,
        RegimeKind::HighVolatility => table.high_volatility,
        RegimeKind::LowVolatility => table.low_volatility,
    };
    FusionWeights { alpha, regime }
}

/// Convex combination of the news and technical signals.
pub fn fuse(s_news: f64, s_technical: f64, alpha: f64) -> Result<f64, FusionError> {
    for (name, v) in [("s_news", s_news), ("s_technical", s_technical)] {
        if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
            return Err(FusionError::DomainViolation { name, value: v, range: "[-1, 1]" });
        }
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(FusionError::DomainViolation { name: "alpha", value: alpha, range: "[0, 1]" });
    }
    Ok(alpha * s_news + (1.0 - alpha) * s_technical)
}

/// Band half-width for classifying a fused score.
pub const DEFAULT_CLASSIFICATION_BAND: f64 = 0.3;

/// Classifies with the default band.
pub fn classify(p_final: f64) -> TrendClass {
    classify_with_band(p_final, DEFAULT_CLASSIFICATION_BAND)
}

/// Up above `+band`, down below `-band`, sideways inside (band edges are
/// sideways, matching the labeling convention).
pub fn classify_with_band(p_final: f64, band: f64) -> TrendClass {
    if p_final > band {
        TrendClass::Up
    } else if p_final < -band {
        TrendClass::Down
    } else {
        TrendClass::Sideways
    }
}

/// The fused class always governs; a news/technical disagreement produces an
/// audit note so the priority decision stays visible in the output.
pub fn resolve_conflict(
    news_class: TrendClass,
    technical_class: TrendClass,
    fused_class: TrendClass,
) -> (TrendClass, Option<String>) {
    if news_class == technical_class {
        (fused_class, None)
    } else {
        let note = format!(
            "news ({news_class}) and technical ({technical_class}) disagree; \
             news-weighted fusion decided {fused_class}"
        );
        (fused_class, Some(note))
    }
}

/// Prediction provenance: which scorer fed the news signal, whether the day
/// had news at all, the volatility regime, and any audit notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: ScoreOrigin,
    pub empty_news: bool,
    pub regime: RegimeKind,
    pub article_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<String>,
}

/// One fused, classified prediction for a (date, horizon) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub date: NaiveDate,
    pub horizon: Horizon,
    pub s_news: f64,
    pub s_technical: f64,
    pub alpha: f64,
    pub p_final: f64,
    pub predicted: TrendClass,
    pub provenance: Provenance,
}

impl Prediction {
    /// Fuses, classifies, and resolves channel disagreement in one step.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        date: NaiveDate,
        horizon: Horizon,
        s_news: f64,
        s_technical: f64,
        weights: FusionWeights,
        band: f64,
        origin: ScoreOrigin,
        empty_news: bool,
        article_count: usize,
        mut audit: Vec<String>,
    ) -> Result<Self, FusionError> {
        let p_final = fuse(s_news, s_technical, weights.alpha)?;
        let news_class = classify_with_band(s_news, band);
        let technical_class = classify_with_band(s_technical, band);
        let fused_class = classify_with_band(p_final, band);
        let (predicted, note) = resolve_conflict(news_class, technical_class, fused_class);
        audit.extend(note);
        Ok(Self {
            date,
            horizon,
            s_news,
            s_technical,
            alpha: weights.alpha,
            p_final,
            predicted,
            provenance: Provenance {
                origin,
                empty_news,
                regime: weights.regime.kind,
                article_count,
                audit,
            },
        })
    }
}
