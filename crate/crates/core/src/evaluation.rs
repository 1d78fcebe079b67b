//! Confusion matrices, three-class metrics, and system comparison reports.
//!
//! Metrics follow the standard definitions: accuracy is trace over total,
//! macro-F1 is the unweighted mean of per-class F1 (a class whose precision
//! and recall are both zero contributes an F1 of 0), and balanced accuracy
//! averages recall over the classes actually present in the truth. Classes
//! absent from the truth are excluded from the balanced-accuracy mean and
//! flagged on the report, since a short backtest window can lack a class
//! entirely and a silent degenerate value would corrupt comparisons.
//!
//! Report rendering fixes four decimal places.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::Prediction;
use crate::market_data::{Horizon, TrendClass};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction ({date}, {horizon}) has no matching label")]
    MissingLabel { date: NaiveDate, horizon: Horizon },
    #[error("duplicate key ({date}, {horizon})")]
    DuplicateKey { date: NaiveDate, horizon: Horizon },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("systems were evaluated on different keys: {0}")]
    KeyMismatch(String),
}

/// 3x3 confusion counts; rows are true classes, columns predicted, in the
/// fixed order (Up, Down, Sideways).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: TrendClass, predicted: TrendClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_count(&self, class: TrendClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn predicted_count(&self, class: TrendClass) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    /// Recall for one class; `None` when the class never occurs in truth.
    pub fn recall(&self, class: TrendClass) -> Option<f64> {
        let support = self.true_count(class);
        (support > 0).then(|| self.counts[class.index()][class.index()] as f64 / support as f64)
    }

    /// Classes with no true samples.
    pub fn absent_true_classes(&self) -> Vec<TrendClass> {
        TrendClass::ALL
            .into_iter()
            .filter(|c| self.true_count(*c) == 0)
            .collect()
    }
}

/// Builds the matrix by joining predictions with ground-truth labels keyed
/// by (date, horizon). Every prediction must have a label; duplicate keys on
/// either side are errors.
pub fn confusion(
    predictions: &[Prediction],
    labels: &[(NaiveDate, Horizon, TrendClass)],
) -> Result<ConfusionMatrix, EvalError> {
    let mut by_key: HashMap<(NaiveDate, Horizon), TrendClass> = HashMap::new();
    for (date, horizon, class) in labels {
        if by_key.insert((*date, *horizon), *class).is_some() {
            return Err(EvalError::DuplicateKey { date: *date, horizon: *horizon });
        }
    }
    let mut seen: HashMap<(NaiveDate, Horizon), ()> = HashMap::new();
    let mut matrix = ConfusionMatrix::default();
    for p in predictions {
        let key = (p.date, p.horizon);
        if seen.insert(key, ()).is_some() {
            return Err(EvalError::DuplicateKey { date: p.date, horizon: p.horizon });
        }
        let truth = by_key
            .get(&key)
            .ok_or(EvalError::MissingLabel { date: p.date, horizon: p.horizon })?;
        matrix.record(*truth, p.predicted);
    }
    Ok(matrix)
}

/// Overall proportion of correct classifications.
pub fn accuracy(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = m.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(m.trace() as f64 / total as f64)
}

/// Unweighted mean of per-class F1. A class with zero precision-plus-recall
/// denominator contributes 0.
pub fn macro_f1(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    if m.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut sum = 0.0;
    for class in TrendClass::ALL {
        let tp = m.counts[class.index()][class.index()] as f64;
        let predicted = m.predicted_count(class) as f64;
        let actual = m.true_count(class) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        sum += f1;
    }
    Ok(sum / 3.0)
}

/// Mean recall over classes with at least one true sample.
pub fn balanced_accuracy(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    if m.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let recalls: Vec<f64> = TrendClass::ALL.into_iter().filter_map(|c| m.recall(c)).collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Which system a report evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemKind {
    Baseline,
    Ours,
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemKind::Baseline => write!(f, "baseline"),
            SystemKind::Ours => write!(f, "ours"),
        }
    }
}

/// Metrics for one (system, horizon) pair, recomputable from the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub system: SystemKind,
    pub horizon: Horizon,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
    pub matrix: ConfusionMatrix,
    pub n: u64,
    /// Classes never present in truth, excluded from balanced accuracy.
    pub absent_classes: Vec<TrendClass>,
}

impl EvaluationReport {
    pub fn from_matrix(
        system: SystemKind,
        horizon: Horizon,
        matrix: ConfusionMatrix,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            system,
            horizon,
            accuracy: accuracy(&matrix)?,
            macro_f1: macro_f1(&matrix)?,
            balanced_accuracy: balanced_accuracy(&matrix)?,
            n: matrix.total(),
            absent_classes: matrix.absent_true_classes(),
            matrix,
        })
    }
}

/// Side-by-side metrics for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub horizon: Horizon,
    pub baseline: [f64; 3],
    pub ours: [f64; 3],
    /// ours minus baseline per metric (accuracy, macro-F1, balanced accuracy).
    pub delta: [f64; 3],
    pub n: u64,
}

/// Per-horizon comparison of the two systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn metrics_of(r: &EvaluationReport) -> [f64; 3] {
    [r.accuracy, r.macro_f1, r.balanced_accuracy]
}

/// Pairs up reports per horizon. Both systems must cover exactly the same
/// horizons with the same sample counts.
pub fn compare(
    baseline: &[EvaluationReport],
    ours: &[EvaluationReport],
) -> Result<ComparisonTable, EvalError> {
    let mut base_by_h: HashMap<Horizon, &EvaluationReport> = HashMap::new();
    for r in baseline {
        base_by_h.insert(r.horizon, r);
    }
    let mut ours_by_h: HashMap<Horizon, &EvaluationReport> = HashMap::new();
    for r in ours {
        ours_by_h.insert(r.horizon, r);
    }
    if base_by_h.len() != ours_by_h.len()
        || !base_by_h.keys().all(|h| ours_by_h.contains_key(h))
    {
        return Err(EvalError::KeyMismatch(format!(
            "baseline horizons {:?} vs ours {:?}",
            {
                let mut v: Vec<u32> = base_by_h.keys().map(|h| h.days()).collect();
                v.sort_unstable();
                v
            },
            {
                let mut v: Vec<u32> = ours_by_h.keys().map(|h| h.days()).collect();
                v.sort_unstable();
                v
            }
        )));
    }
    let mut rows = Vec::new();
    let mut horizons: Vec<Horizon> = base_by_h.keys().copied().collect();
    horizons.sort();
    for h in horizons {
        let b = base_by_h[&h];
        let o = ours_by_h[&h];
        if b.n != o.n {
            return Err(EvalError::KeyMismatch(format!(
                "sample counts differ at {h}: baseline {} vs ours {}",
                b.n, o.n
            )));
        }
        let bm = metrics_of(b);
        let om = metrics_of(o);
        let delta = [om[0] - bm[0], om[1] - bm[1], om[2] - bm[2]];
        rows.push(ComparisonRow { horizon: h, baseline: bm, ours: om, delta, n: b.n });
    }
    Ok(ComparisonTable { rows })
}

pub const COMPARISON_CSV_HEADER: &str = "horizon,system,accuracy,macro_f1,balanced_accuracy,n";
pub const LONG_FORMAT_HEADER: &str = "metric,system,horizon,value";

const METRIC_NAMES: [&str; 3] = ["accuracy", "macro_f1", "balanced_accuracy"];

impl ComparisonTable {
    /// Machine-readable comparison, one row per system x horizon plus a
    /// delta row, four decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            for (system, m) in [("baseline", &row.baseline), ("ours", &row.ours), ("delta", &row.delta)] {
                out.push_str(&format!(
                    "{},{},{:.4},{:.4},{:.4},{}\n",
                    row.horizon, system, m[0], m[1], m[2], row.n
                ));
            }
        }
        out
    }

    /// Long-format rows (metric, system, horizon, value) for plotting tools.
    pub fn to_long_format(&self) -> String {
        let mut out = String::from(LONG_FORMAT_HEADER);
        out.push('\n');
        for row in &self.rows {
            for (system, m) in [("baseline", &row.baseline), ("ours", &row.ours)] {
                for (name, value) in METRIC_NAMES.iter().zip(m) {
                    out.push_str(&format!("{},{},{},{:.4}\n", name, system, row.horizon, value));
                }
            }
        }
        out
    }

    /// Human-readable table in the report column order.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:<10} {:>10} {:>10} {:>14}\n",
            "Horizon", "System", "Accuracy", "Macro-F1", "Balanced Acc"
        ));
        for row in &self.rows {
            for (system, m) in [("baseline", &row.baseline), ("ours", &row.ours), ("delta", &row.delta)] {
                out.push_str(&format!(
                    "{:<8} {:<10} {:>10.4} {:>10.4} {:>14.4}\n",
                    row.horizon.to_string(),
                    system,
                    m[0],
                    m[1],
                    m[2]
                ));
            }
        }
        out
    }
}
