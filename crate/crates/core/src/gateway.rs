//! Scoring backend abstraction: prompt construction, response parsing,
//! retry policy, an HTTP client, and deterministic local backends.
//!
//! The wire exchange is deliberately minimal so any hosted or local model can
//! be adapted with a thin shim: the request body is the rendered prompt text,
//! the response body is seven `name: value` fields (one per dimension). The
//! parser accepts any text in which each of the seven dimension names appears
//! exactly once followed by a number, so JSON-ish replies also parse.
//!
//! Numeric scores outside `[0, 1]` are clamped with a recorded warning;
//! a missing or non-numeric field is a hard parse error. Clamping keeps
//! throughput when a model drifts slightly out of range, while structural
//! failures surface loudly because they usually mean a prompt or model
//! regression.
//!
//! # Mock backend
//!
//! [`MockBackend`] makes full pipeline runs reproducible. Its response for
//! article id `A` under seed `s` is a pure function of `(s, A)`:
//!
//! ```text
//! score_i = (u >> 11) as f64 / 2^53
//!   where u = little-endian u64 of the first 8 bytes of
//!         SHA-256( le64(s) || 0x1F || utf8(A) || 0x1F || [i] )
//!   and i = 0..7 indexes the dimensions in weight order
//! ```
//!
//! The same recipe is re-derived independently in the test suite.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::news::{NewsArticle, DIMENSION_NAMES, DIMENSION_WEIGHTS};

/// Transport-level failure from a backend call.
#[derive(Debug, Error, Clone)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP status {0}")]
    Http(u16),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("response is missing dimension field `{0}`")]
    MissingDimension(&'static str),
    #[error("response contains duplicate dimension field `{0}`")]
    DuplicateDimension(&'static str),
    #[error("dimension field `{name}` has unparseable value `{raw}`")]
    UnparseableNumber { name: &'static str, raw: String },
    #[error("response of {got} bytes exceeds the {limit}-byte limit")]
    OversizedResponse { got: usize, limit: usize },
    #[error("invalid backend policy: {0}")]
    InvalidPolicy(String),
    #[error("backend exhausted after {attempts} attempt(s); last failure: {last}")]
    Exhausted { attempts: u32, last: String },
}

/// A rendered scoring request for one article.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRequest {
    pub article_id: String,
    pub prompt: String,
    pub max_response_bytes: usize,
}

impl ScoringRequest {
    pub const DEFAULT_MAX_RESPONSE_BYTES: usize = 64 * 1024;

    pub fn for_article(article: &NewsArticle) -> Self {
        Self {
            article_id: article.id.clone(),
            prompt: render_prompt(article),
            max_response_bytes: Self::DEFAULT_MAX_RESPONSE_BYTES,
        }
    }
}

/// A parsed backend reply: the raw text plus the seven validated scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringResponse {
    pub article_id: String,
    pub raw: String,
    /// Dimension scores in weight order, clamped to `[0, 1]`.
    pub scores: [f64; 7],
    /// One entry per out-of-range value that was clamped.
    pub clamp_warnings: Vec<String>,
}

/// Retry/timeout policy for backend calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackendPolicy {
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_initial: Duration,
    pub backoff_multiplier: f64,
}

impl Default for BackendPolicy {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            max_retries: 2,
            backoff_initial: Duration::from_millis(250),
            backoff_multiplier: 2.0,
        }
    }
}

impl BackendPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_retries > 10 {
            return Err(GatewayError::InvalidPolicy(format!(
                "max_retries {} exceeds the limit of 10",
                self.max_retries
            )));
        }
        if self.timeout.is_zero() {
            return Err(GatewayError::InvalidPolicy("timeout must be positive".into()));
        }
        if !self.backoff_multiplier.is_finite() || self.backoff_multiplier < 1.0 {
            return Err(GatewayError::InvalidPolicy(
                "backoff multiplier must be finite and at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A scoring backend. `score` sends one prompt and returns the raw reply
/// text. Implementations must be safe for concurrent calls.
pub trait ScoringBackend: Send + Sync {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError>;

    /// Short human-readable identity for logs and provenance.
    fn name(&self) -> &str;
}

/// Shared backend handle as passed through the pipeline.
pub type BackendHandle = Arc<dyn ScoringBackend>;

impl<B: ScoringBackend + ?Sized> ScoringBackend for Arc<B> {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
        (**self).score(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

const PROMPT_CRITERIA: [&str; 7] = [
    "breadth of influence on the overall market, spillover across the sector, systemic risk",
    "expected direct price reaction, near-term versus medium-term strength",
    "expected change in traded volume, liquidity and market participation",
    "policy consequences, compliance burden, likelihood of rule changes",
    "agreement or conflict with current chart and indicator signals",
    "implied volatility, downside exposure, overall uncertainty",
    "immediacy of the effect, delayed responses, persistence of influence",
];

/// Renders the deterministic scoring prompt for an article. Each dimension
/// name appears exactly once; identical articles yield identical bytes.
pub fn render_prompt(article: &NewsArticle) -> String {
    let mut out = String::with_capacity(1024 + article.body.len());
    out.push_str(
        "You are a financial news analyst. Rate the article below on seven dimensions.\n\
         Each rating is a real number between 0.0 and 1.0.\n\nDimensions:\n",
    );
    for ((name, weight), criteria) in DIMENSION_NAMES
        .iter()
        .zip(DIMENSION_WEIGHTS)
        .zip(PROMPT_CRITERIA)
    {
        out.push_str(&format!("- {name} (weight {weight}): {criteria}.\n"));
    }
    out.push_str(
        "\nReply with exactly seven lines, one per dimension in the order listed above,\n\
         each formatted as `<dimension name>: <rating>`. No other text.\n\n",
    );
    out.push_str(&format!("Article id: {}\n", article.id));
    out.push_str(&format!("Headline: {}\n", article.headline));
    out.push_str(&format!("Body:\n{}\n", article.body));
    out
}

/// Extracted scores plus clamp warnings, before being attached to a response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScores {
    pub values: [f64; 7],
    pub warnings: Vec<String>,
}

/// Extracts the seven named numeric fields from a raw reply. Out-of-range
/// values are clamped into `[0, 1]` with a warning; a missing field,
/// duplicate field, or unparseable number is a hard error.
pub fn parse_response(raw: &str) -> Result<ParsedScores, GatewayError> {
    use std::sync::LazyLock;
    static FIELD: LazyLock<regex::Regex> = LazyLock::new(|| {
        let names = DIMENSION_NAMES.join("|");
        regex::Regex::new(&format!(
            r#"(?i)\b({names})\b["']?\s*[:=]\s*("?)(-?[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|[^\s",}}]+)"#
        ))
        .expect("static field pattern compiles")
    });

    let mut values: [Option<f64>; 7] = [None; 7];
    let mut warnings = Vec::new();
    for caps in FIELD.captures_iter(raw) {
        let name_raw = caps.get(1).expect("group 1 present").as_str().to_lowercase();
        let idx = DIMENSION_NAMES
            .iter()
            .position(|n| *n == name_raw)
            .expect("pattern only matches known names");
        let name = DIMENSION_NAMES[idx];
        if values[idx].is_some() {
            return Err(GatewayError::DuplicateDimension(name));
        }
        let raw_value = caps.get(3).expect("group 3 present").as_str();
        let parsed: f64 = raw_value
            .parse()
            .map_err(|_| GatewayError::UnparseableNumber { name, raw: raw_value.to_string() })?;
        if !parsed.is_finite() {
            return Err(GatewayError::UnparseableNumber { name, raw: raw_value.to_string() });
        }
        let clamped = parsed.clamp(0.0, 1.0);
        if clamped != parsed {
            warnings.push(format!("{name} value {parsed} clamped to {clamped}"));
        }
        values[idx] = Some(clamped);
    }
    for (idx, v) in values.iter().enumerate() {
        if v.is_none() {
            return Err(GatewayError::MissingDimension(DIMENSION_NAMES[idx]));
        }
    }
    Ok(ParsedScores {
        values: values.map(|v| v.expect("checked above")),
        warnings,
    })
}

/// Calls the backend up to `1 + max_retries` times with exponential backoff;
/// the first reply that parses wins. The exhaustion error carries the last
/// underlying failure, whether transport or parse.
pub fn call_with_policy(
    request: &ScoringRequest,
    policy: &BackendPolicy,
    backend: &dyn ScoringBackend,
) -> Result<ScoringResponse, GatewayError> {
    policy.validate()?;
    let mut delay = policy.backoff_initial;
    let mut last_failure = String::new();
    for attempt in 0..=policy.max_retries {
        if attempt > 0 && !delay.is_zero() {
            std::thread::sleep(delay);
            delay = Duration::from_secs_f64(delay.as_secs_f64() * policy.backoff_multiplier);
        }
        match backend.score(request) {
            Ok(raw) if raw.len() > request.max_response_bytes => {
                last_failure = GatewayError::OversizedResponse {
                    got: raw.len(),
                    limit: request.max_response_bytes,
                }
                .to_string();
            }
            Ok(raw) => match parse_response(&raw) {
                Ok(parsed) => {
                    for w in &parsed.warnings {
                        log::warn!("article {}: {w}", request.article_id);
                    }
                    return Ok(ScoringResponse {
                        article_id: request.article_id.clone(),
                        raw,
                        scores: parsed.values,
                        clamp_warnings: parsed.warnings,
                    });
                }
                Err(e) => last_failure = format!("parse: {e}"),
            },
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(GatewayError::Exhausted { attempts: policy.max_retries + 1, last: last_failure })
}

fn format_response(scores: &[f64; 7]) -> String {
    DIMENSION_NAMES
        .iter()
        .zip(scores)
        .map(|(name, v)| format!("{name}: {v}\n"))
        .collect()
}

/// Deterministic hash-based backend; see the module docs for the exact
/// byte-level recipe. Stable across runs and platforms.
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The documented score construction for one article id.
    pub fn scores_for(&self, article_id: &str) -> [f64; 7] {
        let mut scores = [0.0; 7];
        for (i, slot) in scores.iter_mut().enumerate() {
            let mut hasher = Sha256::new();
            hasher.update(self.seed.to_le_bytes());
            hasher.update([0x1F]);
            hasher.update(article_id.as_bytes());
            hasher.update([0x1F]);
            hasher.update([i as u8]);
            let digest = hasher.finalize();
            let word = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
            *slot = (word >> 11) as f64 / (1u64 << 53) as f64;
        }
        scores
    }
}

impl ScoringBackend for MockBackend {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
        Ok(format_response(&self.scores_for(&request.article_id)))
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// Backend that replies with the same fixed scores for every article.
pub struct FixedBackend {
    scores: [f64; 7],
}

impl FixedBackend {
    pub fn new(scores: [f64; 7]) -> Self {
        Self { scores }
    }

    /// Mid-range scores on every dimension.
    pub fn neutral() -> Self {
        Self::new([0.5; 7])
    }
}

impl ScoringBackend for FixedBackend {
    fn score(&self, _request: &ScoringRequest) -> Result<String, BackendError> {
        Ok(format_response(&self.scores))
    }

    fn name(&self) -> &str {
        "fixed"
    }
}

/// Backend that always fails with a transport error; exercises retry
/// exhaustion and the baseline fallback path.
pub struct FailingBackend;

impl ScoringBackend for FailingBackend {
    fn score(&self, _request: &ScoringRequest) -> Result<String, BackendError> {
        Err(BackendError::Transport("scripted failure".into()))
    }

    fn name(&self) -> &str {
        "failing"
    }
}

/// Backend that fails the first `fail_first` calls, then delegates.
pub struct FlakyBackend<B> {
    inner: B,
    fail_first: usize,
    calls: AtomicUsize,
}

impl<B> FlakyBackend<B> {
    pub fn new(inner: B, fail_first: usize) -> Self {
        Self { inner, fail_first, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ScoringBackend> ScoringBackend for FlakyBackend<B> {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.fail_first {
            Err(BackendError::Transport(format!("scripted failure {n}")))
        } else {
            self.inner.score(request)
        }
    }

    fn name(&self) -> &str {
        "flaky"
    }
}

/// HTTP backend: POSTs the prompt as plain text and reads the reply body.
/// Credentials come from the environment and are never logged.
pub struct HttpBackend {
    endpoint: String,
    bearer_token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        bearer_token: Option<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { endpoint: endpoint.into(), bearer_token, client })
    }
}

impl ScoringBackend for HttpBackend {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .header("content-type", "text/plain; charset=utf-8")
            .body(request.prompt.clone());
        if let Some(token) = &self.bearer_token {
            req = req.bearer_auth(token);
        }
        let response = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                // reqwest error text never includes headers, so the token stays secret
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Http(status.as_u16()));
        }
        response.text().map_err(|e| BackendError::Transport(e.to_string()))
    }

    fn name(&self) -> &str {
        "remote"
    }
}

/// Default concurrent in-flight request cap.
pub const DEFAULT_IN_FLIGHT_CAP: usize = 8;

/// Caps the number of concurrent in-flight calls to the wrapped backend.
pub struct InFlightLimited<B> {
    inner: B,
    slots: Mutex<usize>,
    freed: Condvar,
}

impl<B> InFlightLimited<B> {
    pub fn new(inner: B, cap: usize) -> Self {
        Self { inner, slots: Mutex::new(cap.max(1)), freed: Condvar::new() }
    }
}

impl<B: ScoringBackend> ScoringBackend for InFlightLimited<B> {
    fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
        let mut slots = self.slots.lock().expect("limiter lock");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("limiter lock");
        }
        *slots -= 1;
        drop(slots);
        let result = self.inner.score(request);
        *self.slots.lock().expect("limiter lock") += 1;
        self.freed.notify_one();
        result
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

impl fmt::Debug for dyn ScoringBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScoringBackend({})", self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    fn article(id: &str) -> NewsArticle {
        NewsArticle {
            id: id.into(),
            published_at: 1_753_056_000,
            headline: "Bitcoin surge expected".into(),
            body: "Analysts expect growth.".into(),
            source: "wire".into(),
        }
    }

    #[test]
    fn prompt_is_deterministic() {
        let a = article("a-1");
        assert_eq!(render_prompt(&a), render_prompt(&a));
    }

    #[test]
    fn prompt_contains_each_dimension_exactly_once() {
        let a = NewsArticle { body: String::new(), ..article("a-1") };
        let prompt = render_prompt(&a);
        for name in DIMENSION_NAMES {
            assert_eq!(prompt.matches(name).count(), 1, "dimension {name}");
        }
        assert!(prompt.contains("Headline: Bitcoin surge expected"));
        assert!(prompt.contains("Body:\n"));
    }

    #[test]
    fn prompts_differ_only_in_id_field() {
        let a = article("a-1");
        let b = article("b-2");
        let pa = render_prompt(&a);
        let pb = render_prompt(&b);
        let diff: Vec<(&str, &str)> = pa
            .lines()
            .zip(pb.lines())
            .filter(|(x, y)| x != y)
            .collect();
        assert_eq!(diff.len(), 1);
        assert!(diff[0].0.starts_with("Article id:"));
    }

    #[test]
    fn parse_well_formed_response() {
        let raw = format_response(&[0.5; 7]);
        let parsed = parse_response(&raw).unwrap();
        assert_eq!(parsed.values, [0.5; 7]);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn parse_accepts_json_shaped_response() {
        let raw = r#"{"market_impact": 0.1, "price_impact": 0.2, "volume_impact": 0.3,
                      "regulatory_impact": 0.4, "technical_correlation": 0.5,
                      "risk_assessment": 0.6, "timing_analysis": 0.7}"#;
        let parsed = parse_response(raw).unwrap();
        assert_eq!(parsed.values, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    }

    #[test]
    fn parse_clamps_out_of_range_with_warning() {
        let mut scores = [0.5; 7];
        scores[1] = 1.7;
        let parsed = parse_response(&format_response(&scores)).unwrap();
        assert_eq!(parsed.values[1], 1.0);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("price_impact"));

        scores[1] = -0.2;
        let parsed = parse_response(&format_response(&scores)).unwrap();
        assert_eq!(parsed.values[1], 0.0);
    }

    #[test]
    fn parse_missing_field_names_it() {
        let raw = DIMENSION_NAMES[..6]
            .iter()
            .map(|n| format!("{n}: 0.5\n"))
            .collect::<String>();
        assert!(matches!(
            parse_response(&raw),
            Err(GatewayError::MissingDimension("timing_analysis"))
        ));
    }

    #[test]
    fn parse_duplicate_field_errors() {
        let raw = format!("{}market_impact: 0.9\n", format_response(&[0.5; 7]));
        assert!(matches!(
            parse_response(&raw),
            Err(GatewayError::DuplicateDimension("market_impact"))
        ));
    }

    #[test]
    fn parse_unparseable_number_errors() {
        let raw = "market_impact: high\nprice_impact: 0.5\nvolume_impact: 0.5\n\
                   regulatory_impact: 0.5\ntechnical_correlation: 0.5\n\
                   risk_assessment: 0.5\ntiming_analysis: 0.5\n";
        assert!(matches!(
            parse_response(raw),
            Err(GatewayError::UnparseableNumber { name: "market_impact", .. })
        ));
    }

    struct CountingBackend<B> {
        inner: B,
        count: AtomicUsize,
    }

    impl<B: ScoringBackend> ScoringBackend for CountingBackend<B> {
        fn score(&self, request: &ScoringRequest) -> Result<String, BackendError> {
            self.count.fetch_add(1, Ordering::SeqCst);
            self.inner.score(request)
        }
        fn name(&self) -> &str {
            "counting"
        }
    }

    fn fast_policy(max_retries: u32) -> BackendPolicy {
        BackendPolicy {
            timeout: Duration::from_secs(1),
            max_retries,
            backoff_initial: Duration::ZERO,
            backoff_multiplier: 1.0,
        }
    }

    #[test]
    fn call_succeeds_first_attempt_with_one_request() {
        let backend = CountingBackend { inner: FixedBackend::neutral(), count: AtomicUsize::new(0) };
        let req = ScoringRequest::for_article(&article("a-1"));
        let resp = call_with_policy(&req, &fast_policy(3), &backend).unwrap();
        assert_eq!(backend.count.load(Ordering::SeqCst), 1);
        assert_eq!(resp.scores, [0.5; 7]);
    }

    #[test]
    fn call_retries_twice_then_succeeds() {
        let backend = FlakyBackend::new(FixedBackend::neutral(), 2);
        let req = ScoringRequest::for_article(&article("a-1"));
        let resp = call_with_policy(&req, &fast_policy(2), &backend).unwrap();
        assert_eq!(backend.calls(), 3);
        assert_eq!(resp.article_id, "a-1");
    }

    #[test]
    fn call_exhausts_after_bounded_attempts() {
        let backend = CountingBackend { inner: FailingBackend, count: AtomicUsize::new(0) };
        let req = ScoringRequest::for_article(&article("a-1"));
        let err = call_with_policy(&req, &fast_policy(1), &backend).unwrap_err();
        assert_eq!(backend.count.load(Ordering::SeqCst), 2);
        match err {
            GatewayError::Exhausted { attempts, last } => {
                assert_eq!(attempts, 2);
                assert!(last.contains("scripted failure"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn call_treats_parse_failure_as_attempt_failure() {
        struct Garbage;
        impl ScoringBackend for Garbage {
            fn score(&self, _r: &ScoringRequest) -> Result<String, BackendError> {
                Ok("not a scoring response".into())
            }
            fn name(&self) -> &str {
                "garbage"
            }
        }
        let req = ScoringRequest::for_article(&article("a-1"));
        let err = call_with_policy(&req, &fast_policy(0), &Garbage).unwrap_err();
        assert!(matches!(err, GatewayError::Exhausted { attempts: 1, .. }));
    }

    #[test]
    fn policy_rejects_excessive_retries() {
        let policy = BackendPolicy { max_retries: 11, ..BackendPolicy::default() };
        assert!(policy.validate().is_err());
    }

    #[test]
    fn mock_is_pure_in_seed_and_id() {
        let backend = MockBackend::new(42);
        let req = ScoringRequest::for_article(&article("a-1"));
        assert_eq!(backend.score(&req).unwrap(), backend.score(&req).unwrap());

        let other_article = backend.scores_for("a-2");
        assert_ne!(backend.scores_for("a-1"), other_article);

        let other_seed = MockBackend::new(43);
        assert_ne!(backend.scores_for("a-1"), other_seed.scores_for("a-1"));
    }

    #[test]
    fn mock_scores_match_documented_recipe() {
        // independent re-derivation of the documented construction
        let seed: u64 = 42;
        let id = "a-1";
        let mut expected = [0.0f64; 7];
        for (i, slot) in expected.iter_mut().enumerate() {
            let mut bytes = Vec::new();
            bytes.extend_from_slice(&seed.to_le_bytes());
            bytes.push(0x1F);
            bytes.extend_from_slice(id.as_bytes());
            bytes.push(0x1F);
            bytes.push(i as u8);
            let digest = Sha256::digest(&bytes);
            let word = u64::from_le_bytes(digest[..8].try_into().unwrap());
            *slot = (word >> 11) as f64 / 9_007_199_254_740_992.0; // 2^53
        }
        assert_eq!(MockBackend::new(seed).scores_for(id), expected);
        assert!(expected.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn mock_response_round_trips_through_parser() {
        let backend = MockBackend::new(7);
        let req = ScoringRequest::for_article(&article("xyz"));
        let raw = backend.score(&req).unwrap();
        let parsed = parse_response(&raw).unwrap();
        assert_eq!(parsed.values, backend.scores_for("xyz"));
    }

    #[test]
    fn limiter_caps_concurrency() {
        use std::sync::atomic::AtomicIsize;

        struct Probe {
            current: AtomicIsize,
            peak: AtomicIsize,
        }
        impl ScoringBackend for Probe {
            fn score(&self, _r: &ScoringRequest) -> Result<String, BackendError> {
                let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.current.fetch_sub(1, Ordering::SeqCst);
                Ok(format_response(&[0.5; 7]))
            }
            fn name(&self) -> &str {
                "probe"
            }
        }

        let limited = Arc::new(InFlightLimited::new(
            Probe { current: AtomicIsize::new(0), peak: AtomicIsize::new(0) },
            2,
        ));
        let mut handles = Vec::new();
        for i in 0..8 {
            let limited = Arc::clone(&limited);
            handles.push(std::thread::spawn(move || {
                let req = ScoringRequest::for_article(&article(&format!("a-{i}")));
                limited.score(&req).unwrap();
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(limited.inner.peak.load(Ordering::SeqCst) <= 2);
    }
}
