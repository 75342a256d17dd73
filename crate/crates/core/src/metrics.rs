//! Binary classification quality metrics: per-class precision, recall and
//! F1, plus overall accuracy. Undefined ratios (0/0) report as 0.0.

/// Metrics for one class treated as the positive label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of ground-truth members of this class.
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub class0: ClassMetrics,
    pub class1: ClassMetrics,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Score (truth, predicted) label pairs. Labels other than 0 are treated
/// as 1.
pub fn evaluate(pairs: impl IntoIterator<Item = (u8, u8)>) -> Evaluation {
    // Confusion counts indexed [truth][predicted].
    let mut matrix = [[0u64; 2]; 2];
    for (truth, pred) in pairs {
        matrix[usize::from(truth != 0)][usize::from(pred != 0)] += 1;
    }
    let class_metrics = |positive: usize| -> ClassMetrics {
        let negative = 1 - positive;
        let tp = matrix[positive][positive];
        let fp = matrix[negative][positive];
        let fn_ = matrix[positive][negative];
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support: tp + fn_,
        }
    };
    let total = matrix.iter().flatten().sum();
    Evaluation {
        class0: class_metrics(0),
        class1: class_metrics(1),
        accuracy: ratio(matrix[0][0] + matrix[1][1], total),
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-checked confusion: 10 rows, truth has four 1s and six 0s;
    /// the predictor catches 3 of the 4 (one false negative) and raises
    /// two false alarms.
    /// class1: P = 3/5, R = 3/4, F1 = 2/3; class0: P = 4/5, R = 4/6,
    /// F1 = 8/11; accuracy 7/10.
    #[test]
    fn hand_checked_ten_rows() {
        let pairs = [
            (1, 1),
            (1, 1),
            (1, 1),
            (1, 0), // false negative
            (0, 1), // false alarm
            (0, 1), // false alarm
            (0, 0),
            (0, 0),
            (0, 0),
            (0, 0),
        ];
        let eval = evaluate(pairs);
        assert_eq!(eval.total, 10);
        assert_eq!(eval.class1.support, 4);
        assert_eq!(eval.class0.support, 6);
        assert!((eval.class1.precision - 0.6).abs() < 1e-12);
        assert!((eval.class1.recall - 0.75).abs() < 1e-12);
        assert!((eval.class1.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((eval.class0.precision - 0.8).abs() < 1e-12);
        assert!((eval.class0.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((eval.class0.f1 - 8.0 / 11.0).abs() < 1e-12);
        assert!((eval.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let pairs = [(0, 0), (1, 1), (0, 0), (1, 1)];
        let eval = evaluate(pairs);
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.class0.f1, 1.0);
        assert_eq!(eval.class1.f1, 1.0);
    }

    #[test]
    fn empty_and_degenerate_inputs_report_zeroes() {
        let eval = evaluate(Vec::<(u8, u8)>::new());
        assert_eq!(eval.total, 0);
        assert_eq!(eval.accuracy, 0.0);
        assert_eq!(eval.class0.f1, 0.0);
        assert_eq!(eval.class1.f1, 0.0);

        // All one class, never predicted: precision and recall 0/0 -> 0.
        let eval = evaluate([(1, 0), (1, 0)]);
        assert_eq!(eval.class1.precision, 0.0);
        assert_eq!(eval.class1.recall, 0.0);
        assert_eq!(eval.class1.f1, 0.0);
        assert_eq!(eval.class1.support, 2);
        assert_eq!(eval.class0.support, 0);
        assert_eq!(eval.accuracy, 0.0);
    }

    #[test]
    fn nonzero_labels_collapse_to_one() {
        let eval = evaluate([(2, 3), (0, 0)]);
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.class1.support, 1);
    }
}
