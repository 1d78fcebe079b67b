//! Shared fixture plumbing for the CLI and acceptance test targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use chrono::NaiveDate;
use trendfuse_core::market_data::write_candles;
use trendfuse_core::news::{write_corpus, NewsArticle};
use trendfuse_core::synthetic::{candle_series, corpus, date_range};

pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub dates: Vec<NaiveDate>,
    pub articles: Vec<NewsArticle>,
}

impl Fixture {
    pub fn predictions_path(&self) -> PathBuf {
        self.out_dir.join("predictions.jsonl")
    }

    pub fn stats_path(&self) -> PathBuf {
        self.out_dir.join("stats.json")
    }
}

/// Writes a candle CSV, corpus JSONL, and config TOML into a temp dir.
///
/// The series runs 110 bars from 2025-06-01; the 60 prediction dates start
/// 2025-07-01, leaving full indicator warmup before and 15 labeling days
/// after. `backend_toml` is spliced in as the `[backend]` section body.
pub fn sixty_day_fixture(backend_toml: &str, workers: usize) -> Fixture {
    fixture_with(backend_toml, workers, 60, 4)
}

pub fn fixture_with(
    backend_toml: &str,
    workers: usize,
    days: usize,
    articles_per_day: usize,
) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let series = candle_series(2025, ymd(2025, 6, 1), 50 + days);
    let dates = date_range(ymd(2025, 7, 1), days);
    let articles = corpus(77, &dates, articles_per_day);

    let candles_path = dir.path().join("candles.csv");
    std::fs::write(&candles_path, write_candles(&series)).unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    std::fs::write(&corpus_path, write_corpus(&articles)).unwrap();

    let out_dir = dir.path().join("out");
    let config_path = dir.path().join("trendfuse.toml");
    let config = format!(
        r#"
[data]
candles = "{}"
corpus = "{}"
output_dir = "{}"

[run]
horizons = [1, 7, 15]
workers = {workers}
start_date = "{}"
end_date = "{}"

[backend]
{backend_toml}
"#,
        candles_path.display(),
        corpus_path.display(),
        out_dir.display(),
        dates[0],
        dates[dates.len() - 1],
    );
    std::fs::write(&config_path, config).unwrap();

    Fixture { dir, config_path, out_dir, dates, articles }
}

/// Hand-built flat-bar series whose nine-date window (bar indices 30..=38)
/// produces all three trend classes for every horizon, so a perfect
/// predictor scores exactly 1.0 on all metrics.
pub fn class_coverage_series(start: NaiveDate) -> (trendfuse_core::market_data::CandleSeries, Vec<NaiveDate>) {
    use trendfuse_core::market_data::{Candle, CandleSeries, DAY_SECONDS};

    let mut closes = vec![100.0f64; 31]; // c0..c30 flat warmup
    let factors = [1.01, 0.99, 1.0];
    for t in 0..9 {
        closes.push(closes[closes.len() - 1] * factors[t % 3]); // c31..c39
    }
    while closes.len() < 45 {
        closes.push(closes[closes.len() - 1]); // c40..c44
    }
    closes.push(closes[30] * 1.01); // c45: 15d Up for the first date
    closes.push(closes[31] * 0.99); // c46: 15d Down for the second
    closes.push(closes[32] * 1.001); // c47: 15d Sideways for the third
    while closes.len() < 55 {
        closes.push(closes[closes.len() - 1]);
    }

    let t0 = start.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    let bars: Vec<Candle> = closes
        .iter()
        .enumerate()
        .map(|(i, &c)| Candle::new(t0 + i as i64 * DAY_SECONDS, c, c, c, c, 1.0).unwrap())
        .collect();
    let series = CandleSeries::new("BTC", bars).unwrap();
    let dates = (30u64..=38).map(|i| start + chrono::Days::new(i)).collect();
    (series, dates)
}

/// Fixture around [`class_coverage_series`]; the corpus file is empty since
/// evaluation never reads it.
pub fn coverage_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let start = ymd(2025, 6, 1);
    let (series, dates) = class_coverage_series(start);

    let candles_path = dir.path().join("candles.csv");
    std::fs::write(&candles_path, write_candles(&series)).unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    std::fs::write(&corpus_path, "").unwrap();

    let out_dir = dir.path().join("out");
    let config_path = dir.path().join("trendfuse.toml");
    let config = format!(
        r#"
[data]
candles = "{}"
corpus = "{}"
output_dir = "{}"
"#,
        candles_path.display(),
        corpus_path.display(),
        out_dir.display(),
    );
    std::fs::write(&config_path, config).unwrap();

    Fixture { dir, config_path, out_dir, dates, articles: Vec::new() }
}

pub fn trendfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trendfuse"))
        .args(args)
        .output()
        .expect("binary launches")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}
