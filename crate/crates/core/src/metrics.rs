//! Per-class error rate, its macro average, macro PPV and accuracy.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `1 - recall` per class; classes absent from the truth count as 0.
    pub per_class_error_rate: Vec<f64>,
    pub avg_er: f64,
    /// Macro precision; classes never predicted contribute 0.
    pub ppv: f64,
    pub accuracy: f64,
    pub n_eval: usize,
}

/// Confusion counts: `counts[truth][pred]`.
pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Shape(format!("label out of range for {n_classes} classes")));
        }
        counts[t][p] += 1;
    }
    Ok(counts)
}

pub fn metrics(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<MetricsReport> {
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cm = confusion(pred, truth, n_classes)?;
    let mut per_class_error_rate = Vec::with_capacity(n_classes);
    let mut ppv_sum = 0.0;
    let mut correct = 0;
    for c in 0..n_classes {
        let support: usize = cm[c].iter().sum();
        let tp = cm[c][c];
        correct += tp;
        per_class_error_rate.push(if support == 0 {
            0.0
        } else {
            1.0 - tp as f64 / support as f64
        });
        let predicted: usize = (0..n_classes).map(|t| cm[t][c]).sum();
        if predicted > 0 {
            ppv_sum += tp as f64 / predicted as f64;
        }
    }
    let avg_er = per_class_error_rate.iter().sum::<f64>() / n_classes as f64;
    Ok(MetricsReport {
        per_class_error_rate,
        avg_er,
        ppv: ppv_sum / n_classes as f64,
        accuracy: correct as f64 / pred.len() as f64,
        n_eval: pred.len(),
    })
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / pred.len() as f64
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = vec![0, 1, 2, 3, 0, 1];
        let m = metrics(&y, &y, 4).unwrap();
        assert_eq!(m.per_class_error_rate, vec![0.0; 4]);
        assert_eq!(m.ppv, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.n_eval, 6);
    }

    #[test]
    fn all_class_zero() {
        let truth: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let pred = vec![0; 8];
        let m = metrics(&pred, &truth, 4).unwrap();
        assert_eq!(m.per_class_error_rate, vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.avg_er, 0.75);
        // class 0: precision 2/8, others never predicted
        assert_eq!(m.ppv, 0.25 / 4.0);
    }

    #[test]
    fn shifted_predictions() {
        let truth: Vec<usize> = (0..12).map(|i| i % 4).collect();
        let pred: Vec<usize> = truth.iter().map(|t| (t + 1) % 4).collect();
        let m = metrics(&pred, &truth, 4).unwrap();
        assert_eq!(m.accuracy, 0.0);
        assert_eq!(m.ppv, 0.0);
        assert_eq!(m.avg_er, 1.0);
    }

    #[test]
    fn empty_and_mismatched() {
        assert!(matches!(metrics(&[], &[], 4), Err(Error::EmptyInput)));
        assert!(metrics(&[0], &[0, 1], 4).is_err());
    }

    #[test]
    fn mean_std_single() {
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
