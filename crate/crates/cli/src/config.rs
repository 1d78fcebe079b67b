//! Run configuration: a sectioned TOML file whose keys mirror the pipeline
//! knobs, with command-line overrides taking precedence over the file and
//! the file over built-in defaults.
//!
//! Secrets never live in the config: `api_key_env` names an environment
//! variable holding the credential, so config files stay committable.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use trendfuse_core::coordination::PipelineConfig;
use trendfuse_core::fusion::{AlphaTable, DEFAULT_CLASSIFICATION_BAND};
use trendfuse_core::gateway::{
    BackendHandle, BackendPolicy, HttpBackend, MockBackend, DEFAULT_IN_FLIGHT_CAP,
};
use trendfuse_core::indicators::IndicatorParams;
use trendfuse_core::market_data::Horizon;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub indicators: IndicatorSection,
    #[serde(default)]
    pub fusion: FusionSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub candles: PathBuf,
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_asset")]
    pub asset: String,
}

fn default_asset() -> String {
    "BTC".to_string()
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            candles: PathBuf::from("candles.csv"),
            corpus: PathBuf::from("corpus.jsonl"),
            output_dir: PathBuf::from("out"),
            asset: default_asset(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u32>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// First prediction date (inclusive); defaults to the earliest date with
    /// full indicator warmup.
    pub start_date: Option<chrono::NaiveDate>,
    /// Last prediction date (inclusive); defaults to the latest date that
    /// leaves room for the longest horizon.
    pub end_date: Option<chrono::NaiveDate>,
}

fn default_horizons() -> Vec<u32> {
    vec![1, 7, 15]
}

fn default_workers() -> usize {
    4
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizons: default_horizons(),
            workers: default_workers(),
            start_date: None,
            end_date: None,
        }
    }
}

/// Which scorer backs the news-analysis agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic hash-based mock.
    Mock,
    /// Remote HTTP endpoint.
    Remote,
    /// Keyword lexicon only; no gateway involved.
    Baseline,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default = "default_backend_kind")]
    pub kind: BackendKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_initial_ms: u64,
    #[serde(default = "default_backoff_multiplier")]
    pub backoff_multiplier: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_fallback_enabled")]
    pub fallback_enabled: bool,
}

fn default_backend_kind() -> BackendKind {
    BackendKind::Mock
}
fn default_seed() -> u64 {
    42
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_backoff_multiplier() -> f64 {
    2.0
}
fn default_max_in_flight() -> usize {
    DEFAULT_IN_FLIGHT_CAP
}
fn default_fallback_enabled() -> bool {
    true
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: default_backend_kind(),
            seed: default_seed(),
            endpoint: None,
            api_key_env: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            backoff_initial_ms: default_backoff_ms(),
            backoff_multiplier: default_backoff_multiplier(),
            max_in_flight: default_max_in_flight(),
            fallback_enabled: default_fallback_enabled(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorSection {
    pub ema_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub rsi_period: usize,
    pub kdj_period: usize,
    pub bb_period: usize,
    pub bb_width: f64,
    pub volatility_window: usize,
}

impl Default for IndicatorSection {
    fn default() -> Self {
        let p = IndicatorParams::default();
        Self {
            ema_period: p.ema_period,
            macd_fast: p.macd_fast,
            macd_slow: p.macd_slow,
            macd_signal: p.macd_signal,
            rsi_period: p.rsi_period,
            kdj_period: p.kdj_period,
            bb_period: p.bb_period,
            bb_width: p.bb_width,
            volatility_window: p.volatility_window,
        }
    }
}

impl IndicatorSection {
    pub fn to_params(&self) -> IndicatorParams {
        IndicatorParams {
            ema_period: self.ema_period,
            macd_fast: self.macd_fast,
            macd_slow: self.macd_slow,
            macd_signal: self.macd_signal,
            rsi_period: self.rsi_period,
            kdj_period: self.kdj_period,
            bb_period: self.bb_period,
            bb_width: self.bb_width,
            volatility_window: self.volatility_window,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSection {
    pub alpha_normal: f64,
    pub alpha_high_volatility: f64,
    pub alpha_low_volatility: f64,
    pub classification_band: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        let t = AlphaTable::default();
        Self {
            alpha_normal: t.normal,
            alpha_high_volatility: t.high_volatility,
            alpha_low_volatility: t.low_volatility,
            classification_band: DEFAULT_CLASSIFICATION_BAND,
        }
    }
}

impl FusionSection {
    pub fn to_alpha_table(&self) -> AlphaTable {
        AlphaTable {
            normal: self.alpha_normal,
            high_volatility: self.alpha_high_volatility,
            low_volatility: self.alpha_low_volatility,
        }
    }
}

/// Command-line overrides that beat the file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Loads the TOML file and applies overrides (flag > file > default).
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        if let Some(dir) = &overrides.output_dir {
            config.data.output_dir = dir.clone();
        }
        if let Some(kind) = overrides.backend {
            config.backend.kind = kind;
        }
        if let Some(seed) = overrides.seed {
            config.backend.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.workers == 0 {
            bail!("run.workers must be at least 1");
        }
        if self.run.horizons.is_empty() {
            bail!("run.horizons must name at least one horizon");
        }
        for days in &self.run.horizons {
            Horizon::from_days(*days).map_err(|e| anyhow::anyhow!("run.horizons: {e}"))?;
        }
        if let (Some(start), Some(end)) = (self.run.start_date, self.run.end_date) {
            if start > end {
                bail!("run.start_date {start} is after run.end_date {end}");
            }
        }
        for (name, v) in [
            ("fusion.alpha_normal", self.fusion.alpha_normal),
            ("fusion.alpha_high_volatility", self.fusion.alpha_high_volatility),
            ("fusion.alpha_low_volatility", self.fusion.alpha_low_volatility),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1], got {v}");
            }
        }
        if !self.fusion.classification_band.is_finite() || self.fusion.classification_band < 0.0 {
            bail!(
                "fusion.classification_band must be non-negative, got {}",
                self.fusion.classification_band
            );
        }
        self.indicators
            .to_params()
            .validate()
            .map_err(|e| anyhow::anyhow!("indicators: {e}"))?;
        self.backend_policy()
            .validate()
            .map_err(|e| anyhow::anyhow!("backend: {e}"))?;
        if self.backend.kind == BackendKind::Remote && self.backend.endpoint.is_none() {
            bail!("backend.kind = \"remote\" requires backend.endpoint");
        }
        Ok(())
    }

    pub fn horizons(&self) -> Vec<Horizon> {
        self.run
            .horizons
            .iter()
            .map(|d| Horizon::from_days(*d).expect("validated"))
            .collect()
    }

    pub fn backend_policy(&self) -> BackendPolicy {
        BackendPolicy {
            timeout: Duration::from_millis(self.backend.timeout_ms),
            max_retries: self.backend.max_retries,
            backoff_initial: Duration::from_millis(self.backend.backoff_initial_ms),
            backoff_multiplier: self.backend.backoff_multiplier,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            workers: self.run.workers,
            indicator_params: self.indicators.to_params(),
            alpha_table: self.fusion.to_alpha_table(),
            classification_band: self.fusion.classification_band,
            policy: self.backend_policy(),
            fallback_enabled: self.backend.fallback_enabled,
            max_in_flight: self.backend.max_in_flight,
            crash_injection: None,
        }
    }

    /// Builds the scoring backend; `None` means baseline-only scoring.
    /// Credentials are read from the environment variable named in
    /// `api_key_env` and never logged.
    pub fn build_backend(&self) -> Result<Option<BackendHandle>> {
        match self.backend.kind {
            BackendKind::Baseline => Ok(None),
            BackendKind::Mock => Ok(Some(Arc::new(MockBackend::new(self.backend.seed)))),
            BackendKind::Remote => {
                let endpoint = self
                    .backend
                    .endpoint
                    .as_ref()
                    .context("backend.endpoint is required for the remote backend")?;
                let token = match &self.backend.api_key_env {
                    Some(var) => Some(std::env::var(var).with_context(|| {
                        format!("credential environment variable {var} is not set")
                    })?),
                    None => None,
                };
                let backend =
                    HttpBackend::new(endpoint.clone(), token, self.backend_policy().timeout)
                        .map_err(|e| anyhow::anyhow!("cannot build http backend: {e}"))?;
                Ok(Some(Arc::new(backend)))
            }
        }
    }
}
