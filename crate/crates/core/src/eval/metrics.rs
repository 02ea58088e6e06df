use crate::error::{Error, Result};

fn check_lengths(y_true: &[usize], y_pred: &[usize]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F1 of one class treated as positive. Empty ratios count as 0.
pub fn class_f1(y_true: &[usize], y_pred: &[usize], class: usize) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f1_from(ratio(tp, tp + fp), ratio(tp, tp + fn_)))
}

/// Binary problems score the `positive` class; otherwise the unweighted
/// mean of per-class F1.
pub fn f1_score(y_true: &[usize], y_pred: &[usize], n_classes: usize, positive: usize) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    if n_classes == 2 {
        return class_f1(y_true, y_pred, positive);
    }
    let mut total = 0.0;
    for c in 0..n_classes {
        total += class_f1(y_true, y_pred, c)?;
    }
    Ok(total / n_classes as f64)
}

/// Mean per-class recall over all `n_classes`; each must occur in `y_true`.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let (hits, support) = recall_counts(y_true, y_pred, n_classes)?;
    if let Some(c) = support.iter().position(|&s| s == 0) {
        return Err(Error::EmptyClassInTruth(c));
    }
    Ok(hits.iter().zip(&support).map(|(&h, &s)| ratio(h, s)).sum::<f64>() / n_classes as f64)
}

/// Mean recall over the classes that occur in `y_true`.
pub fn balanced_accuracy_present(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let (hits, support) = recall_counts(y_true, y_pred, n_classes)?;
    let present: Vec<f64> = hits
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s > 0)
        .map(|(&h, &s)| ratio(h, s))
        .collect();
    if present.is_empty() {
        return Err(Error::DegenerateInput("no ground-truth labels".into()));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

fn recall_counts(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut hits = vec![0; n_classes];
    let mut support = vec![0; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: t,
                size: n_classes,
            });
        }
        support[t] += 1;
        if t == p {
            hits[t] += 1;
        }
    }
    Ok((hits, support))
}

/// `100 * (synthetic - real) / real`.
pub fn percent_difference(real: f64, synthetic: f64) -> Result<f64> {
    if real == 0.0 {
        return Err(Error::DivisionByZeroMetric);
    }
    Ok(100.0 * (synthetic - real) / real)
}
