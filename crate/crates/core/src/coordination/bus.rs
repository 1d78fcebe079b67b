//! Typed in-process message bus with per-sender ordering.
//!
//! Delivery is at-most-once into the recipient's ordered inbox. The bus
//! enforces strictly increasing sequence numbers per (from, to) pair, which
//! turns lost-update and reordering bugs into loud errors instead of silent
//! nondeterminism.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::Mutex;

use chrono::NaiveDate;
use std::sync::Arc;
use thiserror::Error;

use crate::fusion::{Prediction, Regime};
use crate::indicators::IndicatorParams;
use crate::market_data::{CandleSeries, Horizon};
use crate::news::{DailySentiment, NewsArticle, SentimentScore};

/// Agent roles in the prediction pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentRole {
    AssetTracking,
    NewsAnalysis,
    MarketPrediction,
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AgentRole::AssetTracking => "asset-tracking",
            AgentRole::NewsAnalysis => "news-analysis",
            AgentRole::MarketPrediction => "market-prediction",
        };
        write!(f, "{s}")
    }
}

/// Unique agent address: role plus instance number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentId {
    pub role: AgentRole,
    pub instance: u32,
}

impl AgentId {
    pub fn new(role: AgentRole, instance: u32) -> Self {
        Self { role, instance }
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.role, self.instance)
    }
}

/// Per-date technical inputs produced by the asset-tracking agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DateTechnical {
    pub date: NaiveDate,
    pub s_technical: f64,
    pub regime: Regime,
}

/// One article's sentiment as produced by a news-analysis agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredArticle {
    pub article_id: String,
    pub published_at: i64,
    pub sentiment: SentimentScore,
    /// True when the score came from the baseline fallback after gateway
    /// exhaustion.
    pub fallback: bool,
}

/// Message payloads exchanged between agents.
#[derive(Debug, Clone)]
pub enum Payload {
    CandleBatch {
        series: Arc<CandleSeries>,
        dates: Arc<[NaiveDate]>,
        params: IndicatorParams,
    },
    TechnicalSnapshotBatch {
        per_date: Vec<DateTechnical>,
    },
    ArticleBatch {
        articles: Vec<NewsArticle>,
    },
    ScoredArticleBatch {
        scored: Vec<ScoredArticle>,
        /// Articles permanently failed (gateway exhausted, fallback disabled).
        failed: u64,
    },
    DailySentiment {
        date: NaiveDate,
        sentiment: DailySentiment,
    },
    PredictionRequest {
        dates: Vec<NaiveDate>,
        horizons: Vec<Horizon>,
    },
    PredictionResult {
        predictions: Vec<Prediction>,
    },
    Failure {
        reason: String,
    },
}

/// A routed message with a per-(from, to) sequence number.
#[derive(Debug, Clone)]
pub struct Message {
    pub seq: u64,
    pub from: AgentId,
    pub to: AgentId,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("agent {0} is already registered")]
    DuplicateAgent(AgentId),
    #[error("unknown recipient {0}")]
    UnknownRecipient(AgentId),
    #[error("bus is shut down")]
    ShutDown,
    #[error("recipient {0} disconnected")]
    Disconnected(AgentId),
    #[error("non-monotonic seq from {from} to {to}: last {last}, got {got}")]
    NonMonotonicSeq {
        from: AgentId,
        to: AgentId,
        last: u64,
        got: u64,
    },
}

struct BusState {
    inboxes: HashMap<AgentId, Sender<Message>>,
    last_seq: HashMap<(AgentId, AgentId), u64>,
    shut_down: bool,
}

/// In-process message bus. Safe for concurrent dispatch; per-sender order is
/// preserved because dispatch is serialized and inboxes are FIFO.
pub struct Bus {
    state: Mutex<BusState>,
    messages_sent: AtomicU64,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self {
            state: Mutex::new(BusState {
                inboxes: HashMap::new(),
                last_seq: HashMap::new(),
                shut_down: false,
            }),
            messages_sent: AtomicU64::new(0),
        }
    }

    /// Registers an agent and returns its inbox.
    pub fn register(&self, id: AgentId) -> Result<Receiver<Message>, BusError> {
        let mut state = self.state.lock().expect("bus lock");
        if state.shut_down {
            return Err(BusError::ShutDown);
        }
        if state.inboxes.contains_key(&id) {
            return Err(BusError::DuplicateAgent(id));
        }
        let (tx, rx) = std::sync::mpsc::channel();
        state.inboxes.insert(id, tx);
        Ok(rx)
    }

    /// Delivers a message at most once, enforcing per-(from, to) sequence
    /// monotonicity.
    pub fn dispatch(&self, message: Message) -> Result<(), BusError> {
        let mut state = self.state.lock().expect("bus lock");
        if state.shut_down {
            return Err(BusError::ShutDown);
        }
        let Some(tx) = state.inboxes.get(&message.to) else {
            return Err(BusError::UnknownRecipient(message.to));
        };
        let key = (message.from, message.to);
        if let Some(&last) = state.last_seq.get(&key) {
            if message.seq <= last {
                return Err(BusError::NonMonotonicSeq {
                    from: message.from,
                    to: message.to,
                    last,
                    got: message.seq,
                });
            }
        }
        let to = message.to;
        let seq = message.seq;
        tx.send(message).map_err(|_| BusError::Disconnected(to))?;
        state.last_seq.insert(key, seq);
        self.messages_sent.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Rejects all further traffic and drops every inbox sender.
    pub fn shutdown(&self) {
        let mut state = self.state.lock().expect("bus lock");
        state.shut_down = true;
        state.inboxes.clear();
    }

    /// Successfully delivered message count.
    pub fn messages_sent(&self) -> u64 {
        self.messages_sent.load(Ordering::SeqCst)
    }
}

/// A sender-side helper that stamps increasing sequence numbers per
/// destination.
pub struct Outbox<'a> {
    bus: &'a Bus,
    from: AgentId,
    next_seq: HashMap<AgentId, u64>,
}

impl<'a> Outbox<'a> {
    pub fn new(bus: &'a Bus, from: AgentId) -> Self {
        Self { bus, from, next_seq: HashMap::new() }
    }

    pub fn send(&mut self, to: AgentId, payload: Payload) -> Result<(), BusError> {
        let seq = self.next_seq.entry(to).or_insert(0);
        *seq += 1;
        self.bus.dispatch(Message { seq: *seq, from: self.from, to, payload })
    }
}
