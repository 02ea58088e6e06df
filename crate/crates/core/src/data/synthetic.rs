//! A small imbalanced benchmark with planted Gaussian clusters.
//!
//! 600 rows, two continuous columns (`x1`, `x2`), one discrete column
//! (`shade`, three categories) and a binary class with a 5:1 imbalance.
//! Each row is drawn around one of three planted centers; the minority class
//! only occupies the first two.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ColumnSpec, Dataset, DatasetSchema};

pub const PLANTED_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [9.0, 0.0], [4.5, 8.0]];
pub const CLUSTER_STD: f64 = 1.0;
/// Offset of minority rows from their cluster's center.
pub const MINORITY_SHIFT: [f64; 2] = [0.9, 0.9];
/// Majority / minority rows per planted cluster.
pub const MAJORITY_PER_CLUSTER: [usize; 3] = [200, 150, 150];
pub const MINORITY_PER_CLUSTER: [usize; 3] = [60, 40, 0];
pub const SHADES: [&str; 3] = ["light", "medium", "dark"];

pub fn planted_schema() -> DatasetSchema {
    DatasetSchema::new(
        vec![
            ColumnSpec::continuous("x1"),
            ColumnSpec::continuous("x2"),
            ColumnSpec::discrete("shade", SHADES),
        ],
        "label",
        vec!["majority".into(), "minority".into()],
    )
    .expect("static schema is valid")
}

/// Draws the benchmark; the same seed always yields the same table.
pub fn planted_clusters(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, CLUSTER_STD).expect("valid std");
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(600);
    for (cluster, center) in PLANTED_CENTERS.iter().enumerate() {
        for (label, count) in [
            (0usize, MAJORITY_PER_CLUSTER[cluster]),
            (1, MINORITY_PER_CLUSTER[cluster]),
        ] {
            for _ in 0..count {
                let shift = if label == 1 { MINORITY_SHIFT } else { [0.0, 0.0] };
                let x1 = center[0] + shift[0] + noise.sample(&mut rng);
                let x2 = center[1] + shift[1] + noise.sample(&mut rng);
                // the shade follows the cluster 80% of the time
                let shade = if rng.random::<f64>() < 0.8 {
                    cluster
                } else {
                    rng.random_range(0..SHADES.len())
                };
                rows.push((vec![x1, x2, shade as f64], label));
            }
        }
    }
    rows.shuffle(&mut rng);
    let (values, labels): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
    Dataset::from_rows(planted_schema(), &values, labels).expect("generated rows are valid")
}

/// Index of the planted center nearest to `(x1, x2)`.
pub fn nearest_planted_center(x1: f64, x2: f64) -> usize {
    PLANTED_CENTERS
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (c[0] - x1).powi(2) + (c[1] - x2).powi(2)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}
