//! Multi-agent coordination: typed in-process message bus plus the batch
//! prediction pipeline.
//!
//! Three agent roles cooperate: an asset-tracking agent computes technical
//! snapshots and volatility regimes, news-analysis agents score articles in
//! parallel (with bounded retries and baseline fallback), and a market
//! prediction agent fuses the two signals per (date, horizon). All
//! cross-agent state flows through bus messages; there is no shared mutable
//! state beyond the bus itself.
//!
//! The owner thread of [`run_pipeline`] doubles as the single market
//! prediction agent and as supervisor: it detects news-agent crashes through
//! `Failure` messages and re-assigns the dead worker's batch to a fresh
//! instance, so a single crash changes counters but never output bytes.

mod bus;
mod pipeline;

pub use bus::{
    AgentId, AgentRole, Bus, BusError, DateTechnical, Message, Outbox, Payload, ScoredArticle,
};
pub use pipeline::{
    balance_load, fallback_score, run_pipeline, CrashInjection, PipelineConfig, PipelineError,
    PipelineStats, MAX_BATCH_RETRIES,
};
