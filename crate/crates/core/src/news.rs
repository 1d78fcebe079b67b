//! News articles, seven-dimension scoring, the keyword baseline, and daily
//! sentiment aggregation.
//!
//! Dimension scores live in `[0, 1]` and combine into a composite through
//! fixed weights. Downstream fusion works on signed sentiment in `[-1, 1]`,
//! so the composite is bridged with the affine map `2c - 1` (the minimal
//! order-preserving bijection between the two scales).
//!
//! The keyword baseline scores text by whole-word, case-insensitive matching
//! against a five-category lexicon and averages the category scores of all
//! matched occurrences. Averaging occurrences deliberately exposes the
//! baseline's known failure mode: opposing keywords cancel to a fake neutral,
//! and genuinely neutral vocabulary almost never appears, so predictions
//! polarize.
//!
//! Daily aggregation buckets articles by UTC calendar day (the only neutral
//! cut for a market with no session close) and takes the arithmetic mean.
//! A day without news aggregates to a neutral 0.0 carrying an explicit
//! empty-day marker rather than recycling stale sentiment.

use std::fmt;
use std::io::BufRead;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NewsError {
    #[error("dimension {name} score {value} outside [0, 1]")]
    DimensionOutOfRange { name: &'static str, value: f64 },
    #[error("cannot aggregate sentiment scores with mixed origins in one call")]
    MixedOrigins,
    #[error("line {line}: malformed article record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: duplicate article id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: invalid article: {reason}")]
    InvalidArticle { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One raw news item as stored in the corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    /// Publication time, UTC epoch seconds.
    pub published_at: i64,
    pub headline: String,
    pub body: String,
    pub source: String,
}

impl NewsArticle {
    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("id must be non-empty".into());
        }
        if self.published_at <= 0 {
            return Err(format!("published_at must be positive, got {}", self.published_at));
        }
        if self.headline.trim().is_empty() {
            return Err("headline must be non-empty".into());
        }
        Ok(())
    }

    /// Headline and body joined for text scoring.
    pub fn full_text(&self) -> String {
        format!("{} {}", self.headline, self.body)
    }

    /// UTC calendar date of publication.
    pub fn published_date(&self) -> NaiveDate {
        chrono::DateTime::from_timestamp(self.published_at, 0)
            .expect("validated epoch timestamp")
            .date_naive()
    }
}

/// Reads a line-delimited corpus (one JSON article per line), enforcing
/// id uniqueness and per-article invariants. Errors carry line numbers.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<NewsArticle>, NewsError> {
    let mut seen = std::collections::HashSet::new();
    let mut articles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article: NewsArticle =
            serde_json::from_str(&line).map_err(|e| NewsError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        article.validate().map_err(|reason| NewsError::InvalidArticle { line: line_no, reason })?;
        if !seen.insert(article.id.clone()) {
            return Err(NewsError::DuplicateId { line: line_no, id: article.id });
        }
        articles.push(article);
    }
    Ok(articles)
}

/// Serializes articles to the line-delimited corpus format.
pub fn write_corpus(articles: &[NewsArticle]) -> String {
    let mut out = String::new();
    for a in articles {
        out.push_str(&serde_json::to_string(a).expect("article serializes"));
        out.push('\n');
    }
    out
}

/// The seven dimension names, in weight order. Shared by the scoring prompt,
/// the response parser, and the composite.
pub const DIMENSION_NAMES: [&str; 7] = [
    "market_impact",
    "price_impact",
    "volume_impact",
    "regulatory_impact",
    "technical_correlation",
    "risk_assessment",
    "timing_analysis",
];

/// Fixed composite weights, aligned with [`DIMENSION_NAMES`]. They sum to 1.
pub const DIMENSION_WEIGHTS: [f64; 7] = [0.25, 0.20, 0.15, 0.15, 0.10, 0.10, 0.05];

/// Weighted sum of the seven dimension scores. Inputs outside `[0, 1]` are
/// rejected; the result stays in `[0, 1]` by convexity.
pub fn composite_score(dims: &[f64; 7]) -> Result<f64, NewsError> {
    for (name, &value) in DIMENSION_NAMES.iter().zip(dims) {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(NewsError::DimensionOutOfRange { name, value });
        }
    }
    Ok(dims.iter().zip(&DIMENSION_WEIGHTS).map(|(s, w)| s * w).sum())
}

/// Per-article scores on the seven dimensions plus their weighted composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub market_impact: f64,
    pub price_impact: f64,
    pub volume_impact: f64,
    pub regulatory_impact: f64,
    pub technical_correlation: f64,
    pub risk_assessment: f64,
    pub timing_analysis: f64,
    pub composite: f64,
}

impl DimensionScores {
    pub fn new(dims: [f64; 7]) -> Result<Self, NewsError> {
        let composite = composite_score(&dims)?;
        Ok(Self {
            market_impact: dims[0],
            price_impact: dims[1],
            volume_impact: dims[2],
            regulatory_impact: dims[3],
            technical_correlation: dims[4],
            risk_assessment: dims[5],
            timing_analysis: dims[6],
            composite,
        })
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.market_impact,
            self.price_impact,
            self.volume_impact,
            self.regulatory_impact,
            self.technical_correlation,
            self.risk_assessment,
            self.timing_analysis,
        ]
    }
}

/// Which scorer produced a sentiment value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreOrigin {
    MultiDimensional,
    KeywordBaseline,
}

impl fmt::Display for ScoreOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreOrigin::MultiDimensional => write!(f, "multi-dimensional"),
            ScoreOrigin::KeywordBaseline => write!(f, "keyword-baseline"),
        }
    }
}

/// Signed sentiment in `[-1, 1]` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub value: f64,
    pub origin: ScoreOrigin,
}

/// Bridges a `[0, 1]` composite to signed sentiment via `2c - 1`.
pub fn to_sentiment(composite: f64) -> SentimentScore {
    SentimentScore {
        value: 2.0 * composite - 1.0,
        origin: ScoreOrigin::MultiDimensional,
    }
}

/// Scores one article through the backend and assembles the validated
/// composite. Backend exhaustion propagates so the caller can decide on
/// fallback.
pub fn score_article(
    article: &NewsArticle,
    backend: &dyn crate::gateway::ScoringBackend,
    policy: &crate::gateway::BackendPolicy,
) -> Result<DimensionScores, crate::gateway::GatewayError> {
    let request = crate::gateway::ScoringRequest::for_article(article);
    let response = crate::gateway::call_with_policy(&request, policy, backend)?;
    Ok(DimensionScores::new(response.scores).expect("gateway clamps scores into range"))
}

/// One lexicon category: a label, its keywords, and the category score.
#[derive(Debug, Clone, Serialize)]
pub struct LexiconCategory {
    pub label: &'static str,
    pub keywords: &'static [&'static str],
    pub score: f64,
}

/// The five-category keyword lexicon used by the baseline scorer.
#[derive(Debug)]
pub struct Lexicon {
    categories: Vec<LexiconCategory>,
    matcher: Regex,
}

/// A single keyword occurrence found in a text.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordMatch {
    pub keyword: String,
    pub category: &'static str,
    pub score: f64,
}

const LEXICON_TABLE: [(&str, &[&str], f64); 5] = [
    ("Strong Bullish", &["surge", "soar", "breakout"], 1.0),
    ("Bullish", &["growth", "rise", "recovery"], 0.6),
    ("Neutral", &["sideways", "consolidation"], 0.0),
    ("Bearish", &["decline", "correction"], -0.6),
    ("Strong Bearish", &["crash", "plunge"], -1.0),
];

static DEFAULT_LEXICON: LazyLock<Lexicon> = LazyLock::new(Lexicon::compiled_in);

impl Lexicon {
    /// The compiled-in lexicon.
    pub fn default_lexicon() -> &'static Lexicon {
        &DEFAULT_LEXICON
    }

    fn compiled_in() -> Lexicon {
        let categories: Vec<LexiconCategory> = LEXICON_TABLE
            .iter()
            .map(|&(label, keywords, score)| LexiconCategory { label, keywords, score })
            .collect();
        // longest-first so phrase entries win over any single-word prefix
        let mut all: Vec<&str> = categories.iter().flat_map(|c| c.keywords.iter().copied()).collect();
        all.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let pattern = format!(
            r"(?i)\b({})\b",
            all.iter().map(|k| regex::escape(k)).collect::<Vec<_>>().join("|")
        );
        Lexicon {
            categories,
            matcher: Regex::new(&pattern).expect("static lexicon pattern compiles"),
        }
    }

    pub fn categories(&self) -> &[LexiconCategory] {
        &self.categories
    }

    fn score_of(&self, keyword: &str) -> Option<(&'static str, f64)> {
        let lower = keyword.to_lowercase();
        self.categories.iter().find_map(|c| {
            c.keywords
                .iter()
                .any(|k| *k == lower)
                .then_some((c.label, c.score))
        })
    }

    /// Every keyword occurrence in `text`, in reading order. Each occurrence
    /// counts separately.
    pub fn match_occurrences(&self, text: &str) -> Vec<KeywordMatch> {
        self.matcher
            .find_iter(text)
            .map(|m| {
                let (category, score) =
                    self.score_of(m.as_str()).expect("matcher only finds lexicon keywords");
                KeywordMatch { keyword: m.as_str().to_string(), category, score }
            })
            .collect()
    }
}

/// Baseline scorer: mean category score over all keyword occurrences in the
/// text; no matches yield a neutral 0.0.
pub fn keyword_score(text: &str) -> SentimentScore {
    let matches = Lexicon::default_lexicon().match_occurrences(text);
    let value = if matches.is_empty() {
        0.0
    } else {
        matches.iter().map(|m| m.score).sum::<f64>() / matches.len() as f64
    };
    SentimentScore { value, origin: ScoreOrigin::KeywordBaseline }
}

/// Aggregated sentiment for one UTC day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub value: f64,
    pub article_count: usize,
    /// True when no article fell inside the day; the value is then a
    /// stipulated neutral 0.0, not observed sentiment.
    pub empty: bool,
    /// Common origin of the aggregated scores; `None` for an empty day.
    pub origin: Option<ScoreOrigin>,
}

/// Arithmetic mean of the sentiment values published within
/// `[day 00:00, day+1 00:00)` UTC. Scores are summed in input order, so
/// callers wanting reproducible floating-point results must present a
/// deterministic ordering. All scores must share one origin.
pub fn aggregate_daily(
    scores: &[(i64, SentimentScore)],
    day: NaiveDate,
) -> Result<DailySentiment, NewsError> {
    let start = day.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp();
    let end = start + crate::market_data::DAY_SECONDS;
    let mut origin = None;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (published_at, score) in scores {
        if !(start..end).contains(published_at) {
            continue;
        }
        match origin {
            None => origin = Some(score.origin),
            Some(o) if o != score.origin => return Err(NewsError::MixedOrigins),
            Some(_) => {}
        }
        sum += score.value;
        count += 1;
    }
    if count == 0 {
        Ok(DailySentiment { value: 0.0, article_count: 0, empty: true, origin: None })
    } else {
        Ok(DailySentiment {
            value: sum / count as f64,
            article_count: count,
            empty: false,
            origin,
        })
    }
}
