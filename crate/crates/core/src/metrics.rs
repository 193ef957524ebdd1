//! Confusion matrices and derived classification metrics.

use crate::synth::{FaultClass, N_CLASSES};
use std::fmt;

/// Failure modes of metric computation.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// No predictions were accumulated.
    Empty,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Empty => write!(f, "cannot compute metrics from an empty confusion matrix"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// 4×4 count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> ConfusionMatrix {
        ConfusionMatrix::default()
    }

    /// Builds a matrix from explicit counts (row = true, column = predicted).
    pub fn from_counts(counts: [[u64; N_CLASSES]; N_CLASSES]) -> ConfusionMatrix {
        ConfusionMatrix { counts }
    }

    /// Records one prediction.
    pub fn accumulate(&mut self, true_class: FaultClass, predicted: FaultClass) {
        self.counts[true_class.index()][predicted.index()] += 1;
    }

    /// Elementwise sum of two matrices.
    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for i in 0..N_CLASSES {
            for j in 0..N_CLASSES {
                out.counts[i][j] += other.counts[i][j];
            }
        }
        out
    }

    pub fn count(&self, true_class: FaultClass, predicted: FaultClass) -> u64 {
        self.counts[true_class.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][j]).sum()
    }

    fn diagonal_sum(&self) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][i]).sum()
    }
}

/// Per-class precision/recall/F1 plus overall accuracy, indexed by
/// [`FaultClass::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub precision: [f64; N_CLASSES],
    pub recall: [f64; N_CLASSES],
    pub f1: [f64; N_CLASSES],
    pub accuracy: f64,
}

/// Derives precision, recall, F1, and accuracy from a confusion matrix.
///
/// Any metric whose denominator is zero (an empty row, column, or P+R pair)
/// is reported as 0 rather than NaN.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let mut precision = [0.0; N_CLASSES];
    let mut recall = [0.0; N_CLASSES];
    let mut f1 = [0.0; N_CLASSES];
    for k in 0..N_CLASSES {
        let tp = cm.counts[k][k] as f64;
        let col = cm.col_sum(k) as f64;
        let row = cm.row_sum(k) as f64;
        precision[k] = if col > 0.0 { tp / col } else { 0.0 };
        recall[k] = if row > 0.0 { tp / row } else { 0.0 };
        let denom = precision[k] + recall[k];
        f1[k] = if denom > 0.0 {
            2.0 * precision[k] * recall[k] / denom
        } else {
            0.0
        };
    }
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        accuracy: cm.diagonal_sum() as f64 / total as f64,
    })
}

/// Fixed-width text table: counts with per-class metrics at two decimals,
/// then a single accuracy line.
pub fn render_table(cm: &ConfusionMatrix, report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12}{:>8}{:>8}{:>8}{:>8}{:>11}{:>8}{:>8}\n",
        "true\\pred", "1", "2", "3", "4", "precision", "recall", "f1"
    ));
    for (i, &class) in FaultClass::ALL.iter().enumerate() {
        let label = format!("{} {}", class.code(), class.name());
        out.push_str(&format!(
            "{:<12}{:>8}{:>8}{:>8}{:>8}{:>11.2}{:>8.2}{:>8.2}\n",
            label,
            cm.counts[i][0],
            cm.counts[i][1],
            cm.counts[i][2],
            cm.counts[i][3],
            report.precision[i],
            report.recall[i],
            report.f1[i],
        ));
    }
    out.push_str(&format!("accuracy {:.2}\n", report.accuracy));
    out
}

/// CSV form of the report: one row per class plus an accuracy row.
pub fn to_csv(cm: &ConfusionMatrix, report: &MetricsReport) -> String {
    let mut out = String::from("class,pred1,pred2,pred3,pred4,precision,recall,f1\n");
    for (i, &class) in FaultClass::ALL.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            class.code(),
            cm.counts[i][0],
            cm.counts[i][1],
            cm.counts[i][2],
            cm.counts[i][3],
            report.precision[i],
            report.recall[i],
            report.f1[i],
        ));
    }
    out.push_str(&format!("accuracy,,,,,{:.6},,\n", report.accuracy));
    out
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The reference 1000-context matrix used across the test suite.
    pub(crate) fn reference_matrix() -> ConfusionMatrix {
        ConfusionMatrix::from_counts([
            [245, 1, 11, 8],
            [2, 256, 1, 4],
            [5, 2, 230, 5],
            [0, 1, 0, 229],
        ])
    }

    #[test]
    fn reference_matrix_metrics_match_hand_computation() {
        let report = compute_metrics(&reference_matrix()).unwrap();
        // Hand-checked: precision = diagonal / column, recall = diagonal / row.
        let expect_precision = [245.0 / 252.0, 256.0 / 260.0, 230.0 / 242.0, 229.0 / 246.0];
        let expect_recall = [245.0 / 265.0, 256.0 / 263.0, 230.0 / 242.0, 229.0 / 230.0];
        for k in 0..N_CLASSES {
            assert!((report.precision[k] - expect_precision[k]).abs() < 1e-12);
            assert!((report.recall[k] - expect_recall[k]).abs() < 1e-12);
            let want_f1 = 2.0 * expect_precision[k] * expect_recall[k]
                / (expect_precision[k] + expect_recall[k]);
            assert!((report.f1[k] - want_f1).abs() < 1e-12);
        }
        assert!((report.accuracy - 0.96).abs() < 1e-12);
        // At two decimals the table reads 0.97/0.98/0.95/0.93 precision,
        // 0.92/0.97/0.95/1.00 recall, 0.95/0.98/0.95/0.96 F1.
        let at2 = |v: f64| (v * 100.0).round() / 100.0;
        assert_eq!(report.precision.map(at2), [0.97, 0.98, 0.95, 0.93]);
        assert_eq!(report.recall.map(at2), [0.92, 0.97, 0.95, 1.00]);
        assert_eq!(report.f1.map(at2), [0.95, 0.98, 0.95, 0.96]);
    }

    #[test]
    fn identity_matrix_scores_perfectly() {
        let mut cm = ConfusionMatrix::new();
        for &c in &FaultClass::ALL {
            for _ in 0..10 {
                cm.accumulate(c, c);
            }
        }
        let report = compute_metrics(&cm).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for k in 0..N_CLASSES {
            assert_eq!(report.precision[k], 1.0);
            assert_eq!(report.recall[k], 1.0);
            assert_eq!(report.f1[k], 1.0);
        }
    }

    #[test]
    fn absent_class_yields_zero_not_nan() {
        // Everything is predicted as class 1 and only classes 1..3 occur.
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(FaultClass::Normal, FaultClass::Normal);
        cm.accumulate(FaultClass::OuterRing, FaultClass::Normal);
        cm.accumulate(FaultClass::SandBearing, FaultClass::Normal);
        let report = compute_metrics(&cm).unwrap();
        // Class 4 never occurs nor is predicted: all three metrics are 0.
        assert_eq!(report.precision[3], 0.0);
        assert_eq!(report.recall[3], 0.0);
        assert_eq!(report.f1[3], 0.0);
        // Classes 2 and 3 are never predicted: precision 0, recall 0, F1 0.
        assert_eq!(report.precision[1], 0.0);
        assert_eq!(report.f1[1], 0.0);
        assert!(report.precision.iter().all(|v| v.is_finite()));
        assert!(report.f1.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert_eq!(
            compute_metrics(&ConfusionMatrix::new()).unwrap_err(),
            MetricsError::Empty
        );
    }

    #[test]
    fn accuracy_equals_micro_averaged_recall_under_balance() {
        // With equal row sums, accuracy equals the mean per-class recall.
        let cm = ConfusionMatrix::from_counts([
            [20, 2, 2, 1],
            [3, 19, 1, 2],
            [1, 1, 22, 1],
            [2, 2, 1, 20],
        ]);
        let report = compute_metrics(&cm).unwrap();
        let mean_recall: f64 = report.recall.iter().sum::<f64>() / N_CLASSES as f64;
        assert!((report.accuracy - mean_recall).abs() < 1e-12);
    }

    #[test]
    fn permuting_rows_and_columns_permutes_per_class_metrics() {
        let base = reference_matrix();
        let r_base = compute_metrics(&base).unwrap();
        // Swap classes 1 and 3 in both roles.
        let perm = [2usize, 1, 0, 3];
        let mut counts = [[0u64; N_CLASSES]; N_CLASSES];
        for i in 0..N_CLASSES {
            for j in 0..N_CLASSES {
                counts[i][j] = base.count(
                    FaultClass::from_index(perm[i]).unwrap(),
                    FaultClass::from_index(perm[j]).unwrap(),
                );
            }
        }
        let r_perm = compute_metrics(&ConfusionMatrix::from_counts(counts)).unwrap();
        for k in 0..N_CLASSES {
            assert!((r_perm.precision[k] - r_base.precision[perm[k]]).abs() < 1e-15);
            assert!((r_perm.recall[k] - r_base.recall[perm[k]]).abs() < 1e-15);
            assert!((r_perm.f1[k] - r_base.f1[perm[k]]).abs() < 1e-15);
        }
        assert!((r_perm.accuracy - r_base.accuracy).abs() < 1e-15);
    }

    #[test]
    fn merge_is_commutative_and_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let random_cm = |rng: &mut ChaCha8Rng| {
            let mut counts = [[0u64; N_CLASSES]; N_CLASSES];
            for row in counts.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(0..50);
                }
            }
            ConfusionMatrix::from_counts(counts)
        };
        for _ in 0..20 {
            let a = random_cm(&mut rng);
            let b = random_cm(&mut rng);
            let c = random_cm(&mut rng);
            assert_eq!(a.merge(&b), b.merge(&a));
            assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        }
    }

    #[test]
    fn accumulate_then_merge_equals_streaming() {
        // Splitting a prediction stream and merging matches one big pass.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stream: Vec<(FaultClass, FaultClass)> = (0..200)
            .map(|_| {
                (
                    FaultClass::from_index(rng.random_range(0..N_CLASSES)).unwrap(),
                    FaultClass::from_index(rng.random_range(0..N_CLASSES)).unwrap(),
                )
            })
            .collect();
        let mut whole = ConfusionMatrix::new();
        for &(t, p) in &stream {
            whole.accumulate(t, p);
        }
        let mut first = ConfusionMatrix::new();
        let mut second = ConfusionMatrix::new();
        for &(t, p) in &stream[..90] {
            first.accumulate(t, p);
        }
        for &(t, p) in &stream[90..] {
            second.accumulate(t, p);
        }
        assert_eq!(first.merge(&second), whole);
        assert_eq!(whole.total(), 200);
    }

    #[test]
    fn rendered_table_round_trips_counts_and_accuracy() {
        let cm = reference_matrix();
        let report = compute_metrics(&cm).unwrap();
        let table = render_table(&cm, &report);
        // Parse the table back: four count rows then the accuracy line.
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 6);
        for (i, line) in lines[1..5].iter().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            // label code, label name, 4 counts, precision, recall, f1
            let counts: Vec<u64> = fields[2..6].iter().map(|s| s.parse().unwrap()).collect();
            for j in 0..N_CLASSES {
                assert_eq!(
                    counts[j],
                    cm.count(
                        FaultClass::from_index(i).unwrap(),
                        FaultClass::from_index(j).unwrap()
                    )
                );
            }
            let prec: f64 = fields[6].parse().unwrap();
            assert!((prec - (report.precision[i] * 100.0).round() / 100.0).abs() < 1e-9);
        }
        let acc_line = lines[5];
        assert_eq!(acc_line, "accuracy 0.96");
    }
}
