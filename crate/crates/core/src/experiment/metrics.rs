use crate::error::{arg_err, dim_err, Result};
use crate::graphdata::LabelVector;

/// Accuracy, plus foreground (class 1) F1 when `k == 2`.
///
/// F1 is 0 when precision and recall are both 0.
pub fn compute_metrics(
    predicted: &LabelVector,
    truth: &LabelVector,
    k: usize,
) -> Result<(f64, Option<f64>)> {
    if predicted.len() != truth.len() {
        return Err(dim_err(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(arg_err("cannot score an empty label vector"));
    }
    let pairs = || predicted.as_slice().iter().zip(truth.as_slice());
    let correct = pairs().filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / truth.len() as f64;
    if k != 2 {
        return Ok((accuracy, None));
    }
    let tp = pairs().filter(|&(&p, &t)| p == 1 && t == 1).count() as f64;
    let fp = pairs().filter(|&(&p, &t)| p == 1 && t != 1).count() as f64;
    let fn_ = pairs().filter(|&(&p, &t)| p != 1 && t == 1).count() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((accuracy, Some(f1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize], k: usize) -> LabelVector {
        LabelVector::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let y = labels(&[0, 1, 1, 0], 2);
        assert_eq!(compute_metrics(&y, &y, 2).unwrap(), (1.0, Some(1.0)));
    }

    #[test]
    fn zero_recall_gives_zero_f1() {
        let p = labels(&[0, 0, 0], 2);
        let t = labels(&[1, 1, 1], 2);
        assert_eq!(compute_metrics(&p, &t, 2).unwrap(), (0.0, Some(0.0)));
    }

    #[test]
    fn hand_counted_confusion_table() {
        // tp = 1, fp = 1, fn = 1, tn = 1
        let p = labels(&[1, 1, 0, 0], 2);
        let t = labels(&[1, 0, 1, 0], 2);
        assert_eq!(compute_metrics(&p, &t, 2).unwrap(), (0.5, Some(0.5)));
    }

    #[test]
    fn multiclass_has_no_f1() {
        let p = labels(&[0, 2, 1], 3);
        let t = labels(&[0, 1, 1], 3);
        let (acc, f1) = compute_metrics(&p, &t, 3).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1.is_none());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_metrics(&labels(&[0, 1], 2), &labels(&[0], 2), 2).is_err());
    }
}
