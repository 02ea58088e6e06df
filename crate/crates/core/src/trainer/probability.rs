use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster frequencies within each class: `probs[y][u] = n(y, u) / n(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    pub probs: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

impl ProbabilityMatrix {
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let mut probs = Vec::with_capacity(counts.len());
        for (y, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total == 0 {
                return Err(Error::EmptyClass(y));
            }
            probs.push(row.iter().map(|&c| c as f64 / total as f64).collect());
        }
        Ok(Self { probs, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn k(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.probs[y]
    }

    /// Draws a cluster for class `y`. Zero-probability clusters are never drawn.
    pub fn sample_cluster<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        let counts = &self.counts[y];
        let total: usize = counts.iter().sum();
        let mut r = rng.random_range(0..total);
        for (u, &c) in counts.iter().enumerate() {
            if r < c {
                return u;
            }
            r -= c;
        }
        unreachable!("draw below total count")
    }
}

pub fn compute_probability_matrix(
    labels: &[usize],
    assignments: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<ProbabilityMatrix> {
    if labels.len() != assignments.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: assignments.len(),
        });
    }
    let mut counts = vec![vec![0usize; k]; n_classes];
    for (&y, &u) in labels.iter().zip(assignments) {
        if y >= n_classes {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: y,
                size: n_classes,
            });
        }
        if u >= k {
            return Err(Error::IndexOutOfRange {
                what: "cluster",
                index: u,
                size: k,
            });
        }
        counts[y][u] += 1;
    }
    ProbabilityMatrix::from_counts(counts)
}
