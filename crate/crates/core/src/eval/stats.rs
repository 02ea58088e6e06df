use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Scores indexed `[method][dataset]`; `None` marks a missing cell.
pub type ScoreMatrix = Vec<Vec<Option<f64>>>;

fn check(scores: &ScoreMatrix) -> Result<(usize, usize)> {
    let k = scores.len();
    let n = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|row| row.len() != n) {
        return Err(Error::DegenerateInput("ragged score matrix".into()));
    }
    for (m, row) in scores.iter().enumerate() {
        for (d, cell) in row.iter().enumerate() {
            match cell {
                None => return Err(Error::MissingCell { method: m, dataset: d }),
                Some(v) if !v.is_finite() => {
                    return Err(Error::DegenerateInput(format!("non-finite score at ({m}, {d})")))
                }
                _ => {}
            }
        }
    }
    Ok((k, n))
}

/// Ranks of `values` with 1 for the best; tied values share the mean rank.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn rank_columns(scores: &ScoreMatrix, higher_is_better: bool) -> Result<Vec<Vec<f64>>> {
    let (k, n) = check(scores)?;
    let mut ranks = vec![vec![0.0; n]; k];
    for d in 0..n {
        let column: Vec<f64> = scores.iter().map(|row| row[d].expect("checked")).collect();
        for (m, r) in average_ranks(&column, higher_is_better).into_iter().enumerate() {
            ranks[m][d] = r;
        }
    }
    Ok(ranks)
}

/// Mean rank of each method across datasets.
pub fn mean_ranks(scores: &ScoreMatrix, higher_is_better: bool) -> Result<Vec<f64>> {
    let ranks = rank_columns(scores, higher_is_better)?;
    Ok(ranks
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len().max(1) as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
}

/// Friedman rank test with the chi-square approximation.
pub fn friedman_test(scores: &ScoreMatrix) -> Result<FriedmanResult> {
    let (k, n) = check(scores)?;
    if k < 2 || n < 2 {
        return Err(Error::DegenerateInput(format!(
            "Friedman test needs at least 2 methods and 2 datasets, got {k} x {n}"
        )));
    }
    let ranks = rank_columns(scores, true)?;
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = ranks.iter().map(|row| row.iter().sum::<f64>().powi(2)).sum();
    let statistic = (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        gamma_ur((kf - 1.0) / 2.0, statistic / 2.0)
    };
    Ok(FriedmanResult {
        statistic,
        p_value,
        degrees_of_freedom: k - 1,
    })
}
