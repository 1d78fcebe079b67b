//! The batch backtest pipeline over the agent bus.
//!
//! `run_pipeline` is the pipeline owner: it registers itself as the single
//! market-prediction agent, spawns the asset-tracking agent and the
//! news-analysis workers, feeds them batches, supervises failures, and fuses
//! the collected signals into one prediction per (date, horizon).
//!
//! Determinism: article batches are contiguous partitions of a corpus sorted
//! by (published_at, id); collected scores are re-sorted the same way before
//! aggregation, so output bytes do not depend on worker count or scheduling.
//! A crashed news worker announces itself with a `Failure` message (its whole
//! batch is considered undelivered) and the owner re-assigns the batch to a
//! fresh instance; since per-article scoring is pure, the re-run reproduces
//! exactly what the crashed worker would have delivered.

use std::collections::{HashMap, HashSet};
use std::panic::AssertUnwindSafe;
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use super::bus::{
    AgentId, AgentRole, Bus, BusError, DateTechnical, Message, Outbox, Payload, ScoredArticle,
};
use crate::fusion::{alpha_for, detect_regime, AlphaTable, FusionError, Prediction};
use crate::gateway::{
    BackendHandle, BackendPolicy, GatewayError, InFlightLimited, ScoringBackend,
};
use crate::indicators::{
    compute_snapshots, rolling_volatility, IndicatorError, IndicatorParams,
};
use crate::market_data::{CandleSeries, Horizon};
use crate::news::{
    aggregate_daily, keyword_score, score_article, to_sentiment, NewsArticle, NewsError,
    ScoreOrigin, SentimentScore,
};

/// How often one article batch may be re-assigned after worker crashes
/// before the pipeline gives up.
pub const MAX_BATCH_RETRIES: u32 = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    News(#[from] NewsError),
    #[error("invalid backend policy: {0}")]
    Policy(String),
    #[error("no prediction dates supplied")]
    NoDates,
    #[error("no horizons supplied")]
    NoHorizons,
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("classification band must be a non-negative finite number, got {0}")]
    InvalidBand(f64),
    #[error("date {0} is not covered by the candle series")]
    DateNotCovered(NaiveDate),
    #[error("date {date} falls inside warmup: bar index {index}, but indicators and volatility history need {needed}")]
    InsufficientWarmup { date: NaiveDate, needed: usize, index: usize },
    #[error("series ends {available} bar(s) after {date}, but the longest horizon needs {needed}")]
    HorizonNotCovered { date: NaiveDate, needed: usize, available: usize },
    #[error("agent {agent} failed: {reason}")]
    AgentFailed { agent: String, reason: String },
    #[error("news batch {batch} failed {attempts} times; giving up")]
    BatchRetriesExhausted { batch: u32, attempts: u32 },
}

/// Knobs for one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// News-analysis worker instances.
    pub workers: usize,
    pub indicator_params: IndicatorParams,
    pub alpha_table: AlphaTable,
    pub classification_band: f64,
    pub policy: BackendPolicy,
    /// Score through the keyword baseline when the gateway exhausts its
    /// retries. Disabling this lets articles fail permanently.
    pub fallback_enabled: bool,
    /// Concurrent in-flight backend request cap.
    pub max_in_flight: usize,
    /// Test hook: crash one worker after it scored N articles.
    pub crash_injection: Option<CrashInjection>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            indicator_params: IndicatorParams::default(),
            alpha_table: AlphaTable::default(),
            classification_band: crate::fusion::DEFAULT_CLASSIFICATION_BAND,
            policy: BackendPolicy::default(),
            fallback_enabled: true,
            max_in_flight: crate::gateway::DEFAULT_IN_FLIGHT_CAP,
            crash_injection: None,
        }
    }
}

/// Deterministic crash injection for fault-tolerance tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrashInjection {
    /// Initial worker instance to kill.
    pub worker: u32,
    /// Articles the worker scores before panicking.
    pub after_articles: usize,
}

/// Counters for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineStats {
    pub messages_sent: u64,
    pub articles_scored: u64,
    /// Articles that exhausted the gateway with fallback disabled.
    pub articles_failed: u64,
    pub fallbacks_used: u64,
    pub agent_failures: u64,
    pub wall_time: Duration,
}

impl PipelineStats {
    /// Internal consistency violations, empty when the run is sound.
    pub fn audit(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.fallbacks_used > self.articles_scored {
            notes.push(format!(
                "fallbacks_used {} exceeds articles_scored {}: fallback invoked without a \
                 matching scored article",
                self.fallbacks_used, self.articles_scored
            ));
        }
        notes
    }
}

/// Near-equal contiguous partitions: sizes differ by at most one and the
/// assignment depends only on (count, workers).
pub fn balance_load(
    count: usize,
    workers: usize,
) -> Result<Vec<std::ops::Range<usize>>, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::ZeroWorkers);
    }
    let base = count / workers;
    let extra = count % workers;
    let mut ranges = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let size = base + usize::from(w < extra);
        ranges.push(start..start + size);
        start += size;
    }
    Ok(ranges)
}

/// Scores an article with the keyword baseline after gateway exhaustion.
/// Taking the exhaustion error as a parameter keeps the "only after
/// exhaustion" contract visible at the call site.
pub fn fallback_score(article: &NewsArticle, exhaustion: &GatewayError) -> ScoredArticle {
    log::warn!(
        "article {}: gateway exhausted ({exhaustion}); using keyword baseline",
        article.id
    );
    ScoredArticle {
        article_id: article.id.clone(),
        published_at: article.published_at,
        sentiment: keyword_score(&article.full_text()),
        fallback: true,
    }
}

fn predictor() -> AgentId {
    AgentId::new(AgentRole::MarketPrediction, 0)
}

struct WorkerContext {
    backend: Option<Arc<dyn ScoringBackend>>,
    policy: BackendPolicy,
    fallback_enabled: bool,
    crash_after: Option<usize>,
}

fn score_one(article: &NewsArticle, ctx: &WorkerContext) -> Option<ScoredArticle> {
    let Some(backend) = &ctx.backend else {
        // baseline-only mode: the keyword scorer is the system under test,
        // not a fallback
        return Some(ScoredArticle {
            article_id: article.id.clone(),
            published_at: article.published_at,
            sentiment: keyword_score(&article.full_text()),
            fallback: false,
        });
    };
    match score_article(article, backend.as_ref(), &ctx.policy) {
        Ok(scores) => Some(ScoredArticle {
            article_id: article.id.clone(),
            published_at: article.published_at,
            sentiment: to_sentiment(scores.composite),
            fallback: false,
        }),
        Err(exhaustion) if ctx.fallback_enabled => Some(fallback_score(article, &exhaustion)),
        Err(exhaustion) => {
            log::warn!("article {}: permanently failed: {exhaustion}", article.id);
            None
        }
    }
}

fn news_worker(me: AgentId, inbox: Receiver<Message>, bus: Arc<Bus>, ctx: WorkerContext) {
    let articles = loop {
        match inbox.recv() {
            Ok(msg) => {
                if let Payload::ArticleBatch { articles } = msg.payload {
                    break articles;
                }
            }
            // bus torn down before we got work
            Err(_) => return,
        }
    };
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| {
        let mut scored = Vec::with_capacity(articles.len());
        let mut failed = 0u64;
        for (i, article) in articles.iter().enumerate() {
            if ctx.crash_after == Some(i) {
                panic!("injected crash: {me} after {i} article(s)");
            }
            match score_one(article, &ctx) {
                Some(s) => scored.push(s),
                None => failed += 1,
            }
        }
        (scored, failed)
    }));
    let payload = match outcome {
        Ok((scored, failed)) => Payload::ScoredArticleBatch { scored, failed },
        Err(panic) => Payload::Failure { reason: panic_reason(panic) },
    };
    // the owner may already have torn the bus down after a fatal error
    let _ = Outbox::new(&bus, me).send(predictor(), payload);
}

fn asset_worker(me: AgentId, inbox: Receiver<Message>, bus: Arc<Bus>) {
    let (series, dates, params) = loop {
        match inbox.recv() {
            Ok(msg) => {
                if let Payload::CandleBatch { series, dates, params } = msg.payload {
                    break (series, dates, params);
                }
            }
            Err(_) => return,
        }
    };
    let payload = match compute_date_technicals(&series, &dates, &params) {
        Ok(per_date) => Payload::TechnicalSnapshotBatch { per_date },
        Err(e) => Payload::Failure { reason: e.to_string() },
    };
    let _ = Outbox::new(&bus, me).send(predictor(), payload);
}

fn compute_date_technicals(
    series: &CandleSeries,
    dates: &[NaiveDate],
    params: &IndicatorParams,
) -> Result<Vec<DateTechnical>, PipelineError> {
    let snapshots = compute_snapshots(series, params)?;
    let closes = series.closes();
    let vols = rolling_volatility(&closes, params.volatility_window)?;
    let needed = params.snapshot_warmup().max(params.volatility_window + 1);
    let mut out = Vec::with_capacity(dates.len());
    for &date in dates {
        let index = series
            .index_of_date(date)
            .ok_or(PipelineError::DateNotCovered(date))?;
        if index < needed {
            return Err(PipelineError::InsufficientWarmup { date, needed, index });
        }
        let snapshot = snapshots[index]
            .ok_or(PipelineError::InsufficientWarmup { date, needed, index })?;
        let history = &vols[params.volatility_window..index];
        let regime = detect_regime(vols[index], history)?;
        out.push(DateTechnical { date, s_technical: snapshot.s_technical, regime });
    }
    Ok(out)
}

fn panic_reason(panic: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// Runs the full pipeline: exactly one prediction per (date, horizon),
/// sorted by date then horizon, plus run counters.
///
/// `backend = None` selects baseline-only scoring (the keyword lexicon is
/// the system, not a fallback). The candle series must cover every requested
/// date with full indicator warmup before it and the longest horizon after
/// it, so the predictions can later be labeled from the same series.
pub fn run_pipeline(
    corpus: &[NewsArticle],
    series: &CandleSeries,
    dates: &[NaiveDate],
    horizons: &[Horizon],
    backend: Option<BackendHandle>,
    config: &PipelineConfig,
) -> Result<(Vec<Prediction>, PipelineStats), PipelineError> {
    let started = Instant::now();

    if dates.is_empty() {
        return Err(PipelineError::NoDates);
    }
    if horizons.is_empty() {
        return Err(PipelineError::NoHorizons);
    }
    if config.workers == 0 {
        return Err(PipelineError::ZeroWorkers);
    }
    if !config.classification_band.is_finite() || config.classification_band < 0.0 {
        return Err(PipelineError::InvalidBand(config.classification_band));
    }
    config.indicator_params.validate()?;
    config.alpha_table.validate()?;
    config.policy.validate().map_err(|e| PipelineError::Policy(e.to_string()))?;

    let mut dates: Vec<NaiveDate> = dates.to_vec();
    dates.sort_unstable();
    dates.dedup();
    let mut horizons: Vec<Horizon> = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();

    let params = &config.indicator_params;
    let min_index = params.snapshot_warmup().max(params.volatility_window + 1);
    let max_horizon = horizons.iter().map(|h| h.days()).max().expect("non-empty") as usize;
    for &date in &dates {
        let index = series
            .index_of_date(date)
            .ok_or(PipelineError::DateNotCovered(date))?;
        if index < min_index {
            return Err(PipelineError::InsufficientWarmup { date, needed: min_index, index });
        }
        if index + max_horizon > series.len() - 1 {
            return Err(PipelineError::HorizonNotCovered {
                date,
                needed: max_horizon,
                available: series.len() - 1 - index,
            });
        }
    }

    // in-window articles in a scheduling-independent order
    let date_set: HashSet<NaiveDate> = dates.iter().copied().collect();
    let mut articles: Vec<NewsArticle> = corpus
        .iter()
        .filter(|a| date_set.contains(&a.published_date()))
        .cloned()
        .collect();
    articles.sort_by(|a, b| (a.published_at, &a.id).cmp(&(b.published_at, &b.id)));
    let article_by_id: HashMap<&str, &NewsArticle> =
        articles.iter().map(|a| (a.id.as_str(), a)).collect();

    let nominal_origin = if backend.is_some() {
        ScoreOrigin::MultiDimensional
    } else {
        ScoreOrigin::KeywordBaseline
    };
    let shared_backend: Option<Arc<dyn ScoringBackend>> = backend.map(|b| {
        Arc::new(InFlightLimited::new(b, config.max_in_flight)) as Arc<dyn ScoringBackend>
    });

    let bus = Arc::new(Bus::new());
    let my_inbox = bus.register(predictor())?;
    let mut outbox = Outbox::new(&bus, predictor());
    let mut handles: Vec<JoinHandle<()>> = Vec::new();

    let teardown = |bus: &Bus, handles: Vec<JoinHandle<()>>| {
        bus.shutdown();
        for h in handles {
            let _ = h.join();
        }
    };

    // asset-tracking agent
    let asset_id = AgentId::new(AgentRole::AssetTracking, 0);
    let asset_inbox = bus.register(asset_id)?;
    {
        let bus = Arc::clone(&bus);
        handles.push(std::thread::spawn(move || asset_worker(asset_id, asset_inbox, bus)));
    }
    outbox.send(
        asset_id,
        Payload::CandleBatch {
            series: Arc::new(series.clone()),
            dates: dates.clone().into(),
            params: *params,
        },
    )?;

    // news-analysis workers over contiguous partitions; empty partitions
    // spawn nothing
    let spawn_worker = |instance: u32,
                            batch: Vec<NewsArticle>,
                            crash_after: Option<usize>,
                            bus: &Arc<Bus>,
                            outbox: &mut Outbox,
                            handles: &mut Vec<JoinHandle<()>>|
     -> Result<(), PipelineError> {
        let id = AgentId::new(AgentRole::NewsAnalysis, instance);
        let inbox = bus.register(id)?;
        let ctx = WorkerContext {
            backend: shared_backend.clone(),
            policy: config.policy,
            fallback_enabled: config.fallback_enabled,
            crash_after,
        };
        let bus_for_worker = Arc::clone(bus);
        handles.push(std::thread::spawn(move || news_worker(id, inbox, bus_for_worker, ctx)));
        outbox.send(id, Payload::ArticleBatch { articles: batch })?;
        Ok(())
    };

    let mut batch_of: HashMap<u32, Vec<NewsArticle>> = HashMap::new();
    let mut batch_key_of_instance: HashMap<u32, u32> = HashMap::new();
    let mut retries_of_batch: HashMap<u32, u32> = HashMap::new();
    let mut next_instance: u32 = 0;
    let mut outstanding = 0usize;
    for range in balance_load(articles.len(), config.workers)? {
        if range.is_empty() {
            continue;
        }
        let instance = next_instance;
        next_instance += 1;
        let batch = articles[range].to_vec();
        let crash_after = config
            .crash_injection
            .filter(|c| c.worker == instance)
            .map(|c| c.after_articles);
        if let Err(e) = spawn_worker(instance, batch.clone(), crash_after, &bus, &mut outbox, &mut handles)
        {
            teardown(&bus, handles);
            return Err(e);
        }
        batch_of.insert(instance, batch);
        batch_key_of_instance.insert(instance, instance);
        outstanding += 1;
    }

    // supervise and collect
    let mut per_date_technical: Option<Vec<DateTechnical>> = None;
    let mut collected: Vec<ScoredArticle> = Vec::new();
    let mut articles_failed = 0u64;
    let mut agent_failures = 0u64;
    while outstanding > 0 || per_date_technical.is_none() {
        let msg = match my_inbox.recv() {
            Ok(m) => m,
            Err(_) => {
                teardown(&bus, handles);
                return Err(PipelineError::AgentFailed {
                    agent: predictor().to_string(),
                    reason: "inbox closed before all inputs arrived".into(),
                });
            }
        };
        match msg.payload {
            Payload::TechnicalSnapshotBatch { per_date } => per_date_technical = Some(per_date),
            Payload::ScoredArticleBatch { scored, failed } => {
                collected.extend(scored);
                articles_failed += failed;
                outstanding -= 1;
            }
            Payload::Failure { reason } => {
                agent_failures += 1;
                match msg.from.role {
                    AgentRole::NewsAnalysis => {
                        let batch_key = batch_key_of_instance[&msg.from.instance];
                        let attempts = retries_of_batch.entry(batch_key).or_insert(0);
                        *attempts += 1;
                        if *attempts > MAX_BATCH_RETRIES {
                            let attempts = *attempts;
                            teardown(&bus, handles);
                            return Err(PipelineError::BatchRetriesExhausted {
                                batch: batch_key,
                                attempts,
                            });
                        }
                        log::warn!(
                            "news agent {} crashed ({reason}); re-assigning its batch",
                            msg.from
                        );
                        let replacement = next_instance;
                        next_instance += 1;
                        batch_key_of_instance.insert(replacement, batch_key);
                        let batch = batch_of[&batch_key].clone();
                        if let Err(e) = spawn_worker(
                            replacement,
                            batch,
                            None,
                            &bus,
                            &mut outbox,
                            &mut handles,
                        ) {
                            teardown(&bus, handles);
                            return Err(e);
                        }
                    }
                    _ => {
                        let agent = msg.from.to_string();
                        teardown(&bus, handles);
                        return Err(PipelineError::AgentFailed { agent, reason });
                    }
                }
            }
            // other payloads are not part of this phase; ignore
            _ => {}
        }
    }
    let per_date_technical = per_date_technical.expect("loop exits only once present");
    let technical_by_date: HashMap<NaiveDate, DateTechnical> =
        per_date_technical.into_iter().map(|t| (t.date, t)).collect();

    // scheduling-independent order before any floating-point aggregation
    collected.sort_by(|a, b| (a.published_at, &a.article_id).cmp(&(b.published_at, &b.article_id)));
    let articles_scored = collected.len() as u64;
    let fallbacks_used = collected.iter().filter(|s| s.fallback).count() as u64;

    let mut by_date: HashMap<NaiveDate, Vec<&ScoredArticle>> = HashMap::new();
    for s in &collected {
        let date = chrono::DateTime::from_timestamp(s.published_at, 0)
            .expect("validated timestamp")
            .date_naive();
        by_date.entry(date).or_default().push(s);
    }

    let mut predictions = Vec::with_capacity(dates.len() * horizons.len());
    for &date in &dates {
        let technical = technical_by_date
            .get(&date)
            .ok_or(PipelineError::DateNotCovered(date))?;

        let mut day_audit: Vec<String> = Vec::new();
        let inputs: Vec<(i64, SentimentScore)> = match by_date.get(&date) {
            None => Vec::new(),
            Some(list) => {
                let fallback_count = list.iter().filter(|s| s.fallback).count();
                if fallback_count > 0 && fallback_count < list.len() {
                    // a day must aggregate one origin; degrade the whole day
                    // to the baseline scorer instead of mixing scales
                    day_audit.push(format!(
                        "day degraded to keyword baseline: {fallback_count} of {} article(s) \
                         needed fallback",
                        list.len()
                    ));
                    list.iter()
                        .map(|s| {
                            if s.sentiment.origin == ScoreOrigin::KeywordBaseline {
                                (s.published_at, s.sentiment)
                            } else {
                                let article = article_by_id[s.article_id.as_str()];
                                (s.published_at, keyword_score(&article.full_text()))
                            }
                        })
                        .collect()
                } else {
                    list.iter().map(|s| (s.published_at, s.sentiment)).collect()
                }
            }
        };
        let daily = aggregate_daily(&inputs, date)?;
        let origin = daily.origin.unwrap_or(nominal_origin);
        let weights = alpha_for(technical.regime, &config.alpha_table);
        for &horizon in &horizons {
            predictions.push(Prediction::build(
                date,
                horizon,
                daily.value,
                technical.s_technical,
                weights,
                config.classification_band,
                origin,
                daily.empty,
                daily.article_count,
                day_audit.clone(),
            )?);
        }
    }

    teardown(&bus, handles);
    let stats = PipelineStats {
        messages_sent: bus.messages_sent(),
        articles_scored,
        articles_failed,
        fallbacks_used,
        agent_failures,
        wall_time: started.elapsed(),
    };
    Ok((predictions, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_load_examples() {
        let sizes = |count, workers| -> Vec<usize> {
            balance_load(count, workers).unwrap().into_iter().map(|r| r.len()).collect()
        };
        assert_eq!(sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(sizes(0, 4), vec![0, 0, 0, 0]);
        assert_eq!(sizes(7, 7), vec![1; 7]);
        assert!(matches!(balance_load(5, 0), Err(PipelineError::ZeroWorkers)));
    }

    #[test]
    fn balance_load_is_contiguous_and_near_equal() {
        for count in [0usize, 1, 13, 100, 101] {
            for workers in 1..=9 {
                let ranges = balance_load(count, workers).unwrap();
                assert_eq!(ranges.len(), workers);
                let mut expected_start = 0;
                for r in &ranges {
                    assert_eq!(r.start, expected_start);
                    expected_start = r.end;
                }
                assert_eq!(expected_start, count);
                let sizes: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                assert!(max - min <= 1);
            }
        }
    }

    #[test]
    fn fallback_score_uses_keyword_lexicon() {
        let article = NewsArticle {
            id: "a1".into(),
            published_at: 100,
            headline: "prices surge".into(),
            body: String::new(),
            source: "wire".into(),
        };
        let err = GatewayError::Exhausted { attempts: 3, last: "timeout".into() };
        let scored = fallback_score(&article, &err);
        assert_eq!(scored.sentiment.value, 1.0);
        assert_eq!(scored.sentiment.origin, ScoreOrigin::KeywordBaseline);
        assert!(scored.fallback);

        let quiet = NewsArticle { headline: "nothing notable".into(), ..article };
        assert_eq!(fallback_score(&quiet, &err).sentiment.value, 0.0);
    }

    #[test]
    fn stats_audit_flags_impossible_fallback_count() {
        let stats = PipelineStats {
            messages_sent: 10,
            articles_scored: 2,
            articles_failed: 0,
            fallbacks_used: 5,
            agent_failures: 0,
            wall_time: Duration::from_millis(1),
        };
        let notes = stats.audit();
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("fallbacks_used"));

        let sane = PipelineStats { fallbacks_used: 2, ..stats };
        assert!(sane.audit().is_empty());
    }
}
