//! Subcommand implementations: ingest, predict, evaluate, report, and
//! dump-lexicon.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use trendfuse_core::coordination::run_pipeline;
use trendfuse_core::evaluation::{compare, confusion, EvaluationReport, SystemKind};
use trendfuse_core::fusion::Prediction;
use trendfuse_core::market_data::{
    forward_return, label_return, parse_candles, CandleSeries, Horizon, TrendClass,
};
use trendfuse_core::news::{read_corpus, Lexicon, NewsArticle};

use crate::config::RunConfig;
use crate::AppError;

type CmdResult = Result<(), AppError>;

fn load_series(config: &RunConfig) -> Result<CandleSeries, AppError> {
    let path = &config.data.candles;
    let file = fs::File::open(path)
        .with_context(|| format!("cannot open candle file {}", path.display()))
        .map_err(AppError::Data)?;
    parse_candles(BufReader::new(file), &config.data.asset)
        .with_context(|| format!("invalid candle file {}", path.display()))
        .map_err(AppError::Data)
}

fn load_corpus(config: &RunConfig) -> Result<Vec<NewsArticle>, AppError> {
    let path = &config.data.corpus;
    let file = fs::File::open(path)
        .with_context(|| format!("cannot open corpus file {}", path.display()))
        .map_err(AppError::Data)?;
    read_corpus(BufReader::new(file))
        .with_context(|| format!("invalid corpus file {}", path.display()))
        .map_err(AppError::Data)
}

/// Validates inputs and prints one summary line per file.
pub fn ingest(config: &RunConfig) -> CmdResult {
    let series = load_series(config)?;
    let bars = series.bars();
    println!(
        "candles: {} bars from {} to {} ({})",
        series.len(),
        bars[0].date(),
        bars[bars.len() - 1].date(),
        series.asset
    );
    let corpus = load_corpus(config)?;
    if corpus.is_empty() {
        println!("corpus: 0 articles");
        log::warn!("corpus {} contains no articles", config.data.corpus.display());
    } else {
        let first = corpus.iter().map(|a| a.published_at).min().expect("non-empty");
        let last = corpus.iter().map(|a| a.published_at).max().expect("non-empty");
        let to_date = |ts| {
            chrono::DateTime::from_timestamp(ts, 0).expect("validated timestamp").date_naive()
        };
        println!(
            "corpus: {} articles from {} to {}",
            corpus.len(),
            to_date(first),
            to_date(last)
        );
    }
    Ok(())
}

/// The prediction window: configured dates, or the maximal feasible span
/// (full indicator warmup before, longest horizon after).
fn resolve_dates(
    config: &RunConfig,
    series: &CandleSeries,
    horizons: &[Horizon],
) -> Result<Vec<NaiveDate>, AppError> {
    let params = config.indicators.to_params();
    let min_index = params.snapshot_warmup().max(params.volatility_window + 1);
    let max_horizon = horizons.iter().map(|h| h.days()).max().expect("validated") as usize;
    if series.len() <= min_index + max_horizon {
        return Err(AppError::Data(anyhow!(
            "candle series has {} bars but needs more than {} (indicator warmup {} + longest \
             horizon {})",
            series.len(),
            min_index + max_horizon,
            min_index,
            max_horizon
        )));
    }
    let bars = series.bars();
    let first_feasible = bars[min_index].date();
    let last_feasible = bars[series.len() - 1 - max_horizon].date();
    let start = config.run.start_date.unwrap_or(first_feasible);
    let end = config.run.end_date.unwrap_or(last_feasible);
    if start > end {
        return Err(AppError::Data(anyhow!(
            "prediction window is empty: start {start} is after end {end} (feasible span {} to {})",
            first_feasible,
            last_feasible
        )));
    }
    let mut dates = Vec::new();
    let mut date = start;
    while date <= end {
        dates.push(date);
        date = date + chrono::Days::new(1);
    }
    Ok(dates)
}

/// Runs the pipeline and writes `predictions.jsonl` and `stats.json`.
pub fn predict(config: &RunConfig) -> CmdResult {
    let series = load_series(config)?;
    let corpus = load_corpus(config)?;
    let horizons = config.horizons();
    let dates = resolve_dates(config, &series, &horizons)?;
    let backend = config.build_backend().map_err(AppError::Config)?;

    let (predictions, stats) = run_pipeline(
        &corpus,
        &series,
        &dates,
        &horizons,
        backend,
        &config.pipeline_config(),
    )
    .map_err(|e| AppError::Pipeline(e.into()))?;

    for note in stats.audit() {
        log::warn!("stats audit: {note}");
    }

    let out_dir = &config.data.output_dir;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))
        .map_err(AppError::Data)?;
    let predictions_path = out_dir.join("predictions.jsonl");
    let mut body = String::new();
    for p in &predictions {
        body.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        body.push('\n');
    }
    fs::write(&predictions_path, body)
        .with_context(|| format!("cannot write {}", predictions_path.display()))
        .map_err(AppError::Data)?;
    let stats_path = out_dir.join("stats.json");
    fs::write(
        &stats_path,
        serde_json::to_string_pretty(&stats).expect("stats serialize"),
    )
    .with_context(|| format!("cannot write {}", stats_path.display()))
    .map_err(AppError::Data)?;

    println!(
        "wrote {} predictions to {}",
        predictions.len(),
        predictions_path.display()
    );
    println!(
        "stats: messages_sent={} articles_scored={} articles_failed={} fallbacks_used={} \
         agent_failures={} wall_time={:.3}s",
        stats.messages_sent,
        stats.articles_scored,
        stats.articles_failed,
        stats.fallbacks_used,
        stats.agent_failures,
        stats.wall_time.as_secs_f64()
    );
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>, AppError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read predictions file {}", path.display()))
        .map_err(AppError::Data)?;
    let mut predictions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}: malformed prediction", path.display(), i + 1))
            .map_err(AppError::Data)?;
        predictions.push(p);
    }
    if predictions.is_empty() {
        return Err(AppError::Data(anyhow!(
            "predictions file {} contains no records",
            path.display()
        )));
    }
    Ok(predictions)
}

fn ensure_horizons_present(
    predictions: &[Prediction],
    horizons: &[Horizon],
) -> Result<(), AppError> {
    let present: HashSet<Horizon> = predictions.iter().map(|p| p.horizon).collect();
    for h in horizons {
        if !present.contains(h) {
            return Err(AppError::Evaluation(anyhow!(
                "horizon {h} is absent from the predictions file"
            )));
        }
    }
    Ok(())
}

fn labels_for(
    series: &CandleSeries,
    predictions: &[Prediction],
) -> Result<Vec<(NaiveDate, Horizon, TrendClass)>, AppError> {
    predictions
        .iter()
        .map(|p| {
            let index = series.index_of_date(p.date).ok_or_else(|| {
                AppError::Data(anyhow!("prediction date {} is not in the candle series", p.date))
            })?;
            let ret = forward_return(series, index, p.horizon)
                .with_context(|| format!("cannot label ({}, {})", p.date, p.horizon))
                .map_err(AppError::Data)?;
            Ok((p.date, p.horizon, label_return(ret, p.horizon)))
        })
        .collect()
}

fn evaluate_system(
    series: &CandleSeries,
    predictions: &[Prediction],
    system: SystemKind,
) -> Result<Vec<EvaluationReport>, AppError> {
    let mut by_horizon: BTreeMap<Horizon, Vec<Prediction>> = BTreeMap::new();
    for p in predictions {
        by_horizon.entry(p.horizon).or_default().push(p.clone());
    }
    let mut reports = Vec::new();
    for (horizon, preds) in by_horizon {
        let labels = labels_for(series, &preds)?;
        let matrix = confusion(&preds, &labels)
            .with_context(|| format!("{system} at {horizon}"))
            .map_err(AppError::Evaluation)?;
        let report = EvaluationReport::from_matrix(system, horizon, matrix)
            .with_context(|| format!("{system} at {horizon}"))
            .map_err(AppError::Evaluation)?;
        reports.push(report);
    }
    Ok(reports)
}

fn keys_of(predictions: &[Prediction]) -> HashSet<(NaiveDate, u32)> {
    predictions.iter().map(|p| (p.date, p.horizon.days())).collect()
}

fn render_single_system(reports: &[EvaluationReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:<10} {:>10} {:>10} {:>14} {:>6}\n",
        "Horizon", "System", "Accuracy", "Macro-F1", "Balanced Acc", "N"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<8} {:<10} {:>10.4} {:>10.4} {:>14.4} {:>6}\n",
            r.horizon.to_string(),
            r.system.to_string(),
            r.accuracy,
            r.macro_f1,
            r.balanced_accuracy,
            r.n
        ));
        if !r.absent_classes.is_empty() {
            let names: Vec<String> =
                r.absent_classes.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "         note: class(es) {} absent from truth, excluded from balanced \
                 accuracy\n",
                names.join(", ")
            ));
        }
    }
    out
}

struct Evaluation {
    ours_reports: Vec<EvaluationReport>,
    comparison: Option<(Vec<EvaluationReport>, trendfuse_core::evaluation::ComparisonTable)>,
}

fn run_evaluation(
    config: &RunConfig,
    predictions_path: &Path,
    baseline_path: Option<&Path>,
) -> Result<Evaluation, AppError> {
    let series = load_series(config)?;
    let horizons = config.horizons();
    let ours = read_predictions(predictions_path)?;
    ensure_horizons_present(&ours, &horizons)?;
    let ours_reports = evaluate_system(&series, &ours, SystemKind::Ours)?;

    let comparison = match baseline_path {
        None => None,
        Some(path) => {
            let baseline = read_predictions(path)?;
            ensure_horizons_present(&baseline, &horizons)?;
            if keys_of(&baseline) != keys_of(&ours) {
                return Err(AppError::Evaluation(anyhow!(
                    "baseline and ours cover different (date, horizon) keys; \
                     re-run both systems over the same window"
                )));
            }
            let baseline_reports = evaluate_system(&series, &baseline, SystemKind::Baseline)?;
            let table = compare(&baseline_reports, &ours_reports)
                .context("comparison failed")
                .map_err(AppError::Evaluation)?;
            Some((baseline_reports, table))
        }
    };
    Ok(Evaluation { ours_reports, comparison })
}

/// Evaluates prediction files and writes reports plus comparison tables.
pub fn evaluate(
    config: &RunConfig,
    predictions_path: &Path,
    baseline_path: Option<&Path>,
) -> CmdResult {
    let evaluation = run_evaluation(config, predictions_path, baseline_path)?;

    let out_dir = &config.data.output_dir;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))
        .map_err(AppError::Data)?;

    let mut all_reports = evaluation.ours_reports.clone();
    if let Some((baseline_reports, _)) = &evaluation.comparison {
        all_reports.extend(baseline_reports.clone());
    }
    let reports_path = out_dir.join("reports.json");
    fs::write(
        &reports_path,
        serde_json::to_string_pretty(&all_reports).expect("reports serialize"),
    )
    .with_context(|| format!("cannot write {}", reports_path.display()))
    .map_err(AppError::Data)?;
    println!("wrote {}", reports_path.display());

    match &evaluation.comparison {
        Some((_, table)) => {
            let csv_path = out_dir.join("comparison.csv");
            fs::write(&csv_path, table.to_csv())
                .with_context(|| format!("cannot write {}", csv_path.display()))
                .map_err(AppError::Data)?;
            let long_path = out_dir.join("comparison_long.csv");
            fs::write(&long_path, table.to_long_format())
                .with_context(|| format!("cannot write {}", long_path.display()))
                .map_err(AppError::Data)?;
            println!("wrote {}", csv_path.display());
            println!("wrote {}", long_path.display());
            print!("{}", table.render_text());
        }
        None => print!("{}", render_single_system(&evaluation.ours_reports)),
    }
    Ok(())
}

/// Prints the evaluation table without writing files.
pub fn report(
    config: &RunConfig,
    predictions_path: &Path,
    baseline_path: Option<&Path>,
) -> CmdResult {
    let evaluation = run_evaluation(config, predictions_path, baseline_path)?;
    match &evaluation.comparison {
        Some((_, table)) => print!("{}", table.render_text()),
        None => print!("{}", render_single_system(&evaluation.ours_reports)),
    }
    Ok(())
}

/// Prints every lexicon category as one JSON record per line.
pub fn dump_lexicon() -> CmdResult {
    for category in Lexicon::default_lexicon().categories() {
        println!(
            "{}",
            serde_json::to_string(category).expect("lexicon category serializes")
        );
    }
    Ok(())
}
