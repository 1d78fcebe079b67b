//! Metric implementations checked against a brute-force transcription of the
//! definitions on random confusion matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use trendfuse_core::evaluation::{accuracy, balanced_accuracy, macro_f1, ConfusionMatrix};

fn accuracy_ref(m: &[[u64; 3]; 3]) -> f64 {
    let total: u64 = m.iter().flatten().sum();
    let correct: u64 = (0..3).map(|i| m[i][i]).sum();
    correct as f64 / total as f64
}

fn macro_f1_ref(m: &[[u64; 3]; 3]) -> f64 {
    let mut f1_sum = 0.0;
    for c in 0..3 {
        let tp = m[c][c] as f64;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for other in 0..3 {
            if other != c {
                fp += m[other][c] as f64;
                fn_ += m[c][other] as f64;
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    f1_sum / 3.0
}

fn balanced_accuracy_ref(m: &[[u64; 3]; 3]) -> f64 {
    let mut recall_sum = 0.0;
    let mut present = 0.0;
    for c in 0..3 {
        let support: u64 = m[c].iter().sum();
        if support > 0 {
            recall_sum += m[c][c] as f64 / support as f64;
            present += 1.0;
        }
    }
    recall_sum / present
}

#[test]
fn metrics_match_brute_force_on_random_matrices() {
    let mut rng = ChaCha20Rng::seed_from_u64(314_159);
    let mut checked = 0;
    while checked < 1_000 {
        let mut counts = [[0u64; 3]; 3];
        for row in counts.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.gen_range(0..=20);
            }
        }
        let total: u64 = counts.iter().flatten().sum();
        if total == 0 {
            continue;
        }
        checked += 1;
        let m = ConfusionMatrix::from_counts(counts);
        assert!(
            (accuracy(&m).unwrap() - accuracy_ref(&counts)).abs() <= 1e-12,
            "accuracy mismatch on {counts:?}"
        );
        assert!(
            (macro_f1(&m).unwrap() - macro_f1_ref(&counts)).abs() <= 1e-12,
            "macro-f1 mismatch on {counts:?}"
        );
        assert!(
            (balanced_accuracy(&m).unwrap() - balanced_accuracy_ref(&counts)).abs() <= 1e-12,
            "balanced accuracy mismatch on {counts:?}"
        );
    }
}

#[test]
fn perfect_diagonals_score_exactly_one() {
    let mut rng = ChaCha20Rng::seed_from_u64(2_718);
    for _ in 0..50 {
        let counts = [
            [rng.gen_range(1..=50), 0, 0],
            [0, rng.gen_range(1..=50), 0],
            [0, 0, rng.gen_range(1..=50)],
        ];
        let m = ConfusionMatrix::from_counts(counts);
        assert_eq!(accuracy(&m).unwrap(), 1.0);
        assert_eq!(macro_f1(&m).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&m).unwrap(), 1.0);
    }
}
