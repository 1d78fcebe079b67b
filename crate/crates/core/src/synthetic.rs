//! Deterministic synthetic fixtures for tests, benchmarks, and demos.
//!
//! Everything here is a pure function of its seed, so fixtures can be
//! regenerated byte-identically anywhere without shipping data files.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::market_data::{Candle, CandleSeries, DAY_SECONDS};
use crate::news::NewsArticle;

/// `n` consecutive dates starting at `start`.
pub fn date_range(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n).map(|i| start + Days::new(i as u64)).collect()
}

/// A seeded daily random-walk series of `n` bars beginning at `start`.
pub fn candle_series(seed: u64, start: NaiveDate, n: usize) -> CandleSeries {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t0 = start.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
    let mut close = 30_000.0f64;
    let mut bars = Vec::with_capacity(n);
    for i in 0..n {
        let open = close;
        close *= 1.0 + rng.gen_range(-0.025..0.025);
        let high = open.max(close) * (1.0 + rng.gen_range(0.0..0.008));
        let low = open.min(close) * (1.0 - rng.gen_range(0.0..0.008));
        let volume = rng.gen_range(10.0..5_000.0);
        bars.push(
            Candle::new(t0 + i as i64 * DAY_SECONDS, open, high, low, close, volume)
                .expect("generated bars satisfy invariants"),
        );
    }
    CandleSeries::new("BTC", bars).expect("generated series is gap-free")
}

/// A perfectly flat series: every forward return is zero, so every horizon
/// labels `Sideways`, all indicators sit at their neutral fixed points, and
/// realized volatility is exactly zero.
pub fn flat_series(start: NaiveDate, n: usize, price: f64) -> CandleSeries {
    let t0 = start.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
    let bars = (0..n)
        .map(|i| {
            Candle::new(t0 + i as i64 * DAY_SECONDS, price, price, price, price, 100.0)
                .expect("flat bar is valid")
        })
        .collect();
    CandleSeries::new("BTC", bars).expect("flat series is gap-free")
}

const BULLISH_HEADLINES: [&str; 6] = [
    "Bitcoin surge follows ETF inflows",
    "Token prices soar after network upgrade",
    "Analysts call breakout above key resistance",
    "On-chain growth accelerates into quarter end",
    "Spot demand points to rise in adoption",
    "Funding normalizes amid recovery hopes",
];

const BEARISH_HEADLINES: [&str; 6] = [
    "Exchange outage triggers crash fears",
    "Leverage flush sparks plunge overnight",
    "Miners brace for decline in fee revenue",
    "Desks position for correction after rally",
    "Stablecoin wobble stokes crash chatter",
    "Funding squeeze hints at decline ahead",
];

const NEUTRAL_KEYWORD_HEADLINES: [&str; 2] = [
    "Market trades sideways into the weekend",
    "Rangebound consolidation continues on majors",
];

const NO_KEYWORD_HEADLINES: [&str; 4] = [
    "Custody provider adds insurance coverage",
    "Conference highlights scaling roadmap",
    "Regulator schedules hearing on stablecoins",
    "Derivatives venue updates margin rules",
];

const BODIES: [&str; 3] = [
    "Desk notes cite positioning data. Liquidity remains adequate across venues.",
    "Order books thinned overnight while basis held steady.",
    "Flows were concentrated in the largest pairs, according to venue data.",
];

const SOURCES: [&str; 3] = ["newswire-a", "newswire-b", "desk-memo"];

fn build_corpus(
    seed: u64,
    dates: &[NaiveDate],
    per_day: usize,
    headlines: &[&str],
) -> Vec<NewsArticle> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut articles = Vec::with_capacity(dates.len() * per_day);
    let mut serial = 0usize;
    for date in dates {
        let day_start = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        for _ in 0..per_day {
            let offset = rng.gen_range(0..DAY_SECONDS);
            articles.push(NewsArticle {
                id: format!("a{serial:05}"),
                published_at: day_start + offset,
                headline: headlines[rng.gen_range(0..headlines.len())].to_string(),
                body: BODIES[rng.gen_range(0..BODIES.len())].to_string(),
                source: SOURCES[rng.gen_range(0..SOURCES.len())].to_string(),
            });
            serial += 1;
        }
    }
    articles
}

/// A mixed corpus: bullish, bearish, neutral-keyword, and keyword-free
/// headlines, `per_day` articles on each date.
pub fn corpus(seed: u64, dates: &[NaiveDate], per_day: usize) -> Vec<NewsArticle> {
    let mut headlines = Vec::new();
    headlines.extend(BULLISH_HEADLINES);
    headlines.extend(BEARISH_HEADLINES);
    headlines.extend(NEUTRAL_KEYWORD_HEADLINES);
    headlines.extend(NO_KEYWORD_HEADLINES);
    build_corpus(seed, dates, per_day, &headlines)
}

/// A corpus whose headlines carry only polarizing lexicon keywords and never
/// the neutral ones; exercises the keyword baseline's polarization bias.
pub fn polarized_corpus(seed: u64, dates: &[NaiveDate], per_day: usize) -> Vec<NewsArticle> {
    let mut headlines = Vec::new();
    headlines.extend(BULLISH_HEADLINES);
    headlines.extend(BEARISH_HEADLINES);
    build_corpus(seed, dates, per_day, &headlines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::news::Lexicon;

    #[test]
    fn generators_are_deterministic() {
        let start = NaiveDate::from_ymd_opt(2025, 7, 1).unwrap();
        assert_eq!(candle_series(9, start, 50), candle_series(9, start, 50));
        let dates = date_range(start, 5);
        assert_eq!(corpus(3, &dates, 4), corpus(3, &dates, 4));
    }

    #[test]
    fn polarized_corpus_has_no_neutral_keywords() {
        let start = NaiveDate::from_ymd_opt(2025, 7, 1).unwrap();
        let dates = date_range(start, 10);
        let lex = Lexicon::default_lexicon();
        for article in polarized_corpus(11, &dates, 5) {
            let matches = lex.match_occurrences(&article.full_text());
            assert!(!matches.is_empty(), "polarized headline must carry a keyword");
            assert!(matches.iter().all(|m| m.category != "Neutral"));
        }
    }

    #[test]
    fn corpus_ids_unique_and_dates_in_range() {
        let start = NaiveDate::from_ymd_opt(2025, 7, 1).unwrap();
        let dates = date_range(start, 7);
        let articles = corpus(5, &dates, 3);
        assert_eq!(articles.len(), 21);
        let mut ids = std::collections::HashSet::new();
        for a in &articles {
            assert!(ids.insert(a.id.clone()));
            assert!(dates.contains(&a.published_date()));
        }
    }
}
