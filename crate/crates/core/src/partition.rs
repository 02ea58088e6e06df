//! Space partitioning of the input rows with k-means++ and automatic choice
//! of `k` by scaled inertia, `I(k) / I(1) + a * k`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Standardization statistics for continuous columns, and the one-hot widths
/// of discrete columns, used to embed rows for clustering. Class labels never
/// enter the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePrep {
    pub columns: Vec<PreppedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PreppedColumn {
    Continuous { mean: f64, std: f64 },
    Discrete { width: usize },
}

impl FeaturePrep {
    pub fn fit(ds: &Dataset) -> Self {
        let m = ds.n_rows() as f64;
        let columns = ds
            .schema()
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| match col.kind {
                ColumnKind::Continuous => {
                    let mean = ds.rows().map(|r| r[j]).sum::<f64>() / m;
                    let var = ds.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m;
                    PreppedColumn::Continuous { mean, std: var.sqrt() }
                }
                ColumnKind::Discrete => PreppedColumn::Discrete {
                    width: col.categories.len(),
                },
            })
            .collect();
        Self { columns }
    }

    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                PreppedColumn::Continuous { .. } => 1,
                PreppedColumn::Discrete { width } => *width,
            })
            .sum()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Array2<f64>> {
        if ds.n_columns() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: ds.n_columns(),
            });
        }
        let mut out = Array2::zeros((ds.n_rows(), self.width()));
        for (i, row) in ds.rows().enumerate() {
            let mut offset = 0;
            for (col, &v) in self.columns.iter().zip(row) {
                match *col {
                    PreppedColumn::Continuous { mean, std } => {
                        out[[i, offset]] = if std > 0.0 { (v - mean) / std } else { 0.0 };
                        offset += 1;
                    }
                    PreppedColumn::Discrete { width } => {
                        out[[i, offset + v as usize]] = 1.0;
                        offset += width;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Embeds a dataset for clustering: standardized continuous columns (constant
/// columns map to 0) followed in schema order by one-hot discrete columns.
pub fn build_cluster_features(ds: &Dataset) -> (Array2<f64>, FeaturePrep) {
    let prep = FeaturePrep::fit(ds);
    let features = prep.apply(ds).expect("prep fitted on the same dataset");
    (features, prep)
}

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step; never increases.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per row (ties go to the lowest index) with its squared distance.
fn nearest(features: ArrayView2<f64>, centroids: ArrayView2<f64>) -> (Vec<usize>, Vec<f64>) {
    features
        .outer_iter()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.outer_iter().enumerate() {
                let d = sq_dist(x, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

fn kmeans_pp_seeds(features: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = features.nrows();
    let mut centroids = Array2::zeros((k, features.ncols()));
    let first = rng.random_range(0..m);
    centroids.row_mut(0).assign(&features.row(first));
    let mut d2: Vec<f64> = features.outer_iter().map(|x| sq_dist(x, features.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centroids.row_mut(c).assign(&features.row(pick));
        for (i, x) in features.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, features.row(pick)));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or `max_iter` updates have run. An empty cluster is re-seeded at
/// the row farthest from its current centroid.
fn lloyd(features: ArrayView2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeansFit {
    let k = centroids.nrows();
    let (mut assignments, mut dists) = nearest(features, centroids.view());
    let mut trace = vec![dists.iter().sum::<f64>()];
    for _ in 0..max_iter {
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (x, &c) in features.outer_iter().zip(&assignments) {
            let mut row = sums.row_mut(c);
            row += &x;
            counts[c] += 1;
        }
        let mut taken = vec![false; features.nrows()];
        #[allow(clippy::needless_range_loop)]
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                let far = dists
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b })
                    .0;
                taken[far] = true;
                centroids.row_mut(c).assign(&features.row(far));
            }
        }
        let (next, next_dists) = nearest(features, centroids.view());
        trace.push(next_dists.iter().sum());
        dists = next_dists;
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
    }
    KMeansFit {
        centroids,
        assignments,
        inertia: *trace.last().expect("trace is never empty"),
        inertia_trace: trace,
    }
}

/// k-means++ seeding (D² weighting) followed by Lloyd iterations.
pub fn kmeans_pp_fit(features: ArrayView2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    let m = features.nrows();
    if k == 0 || k > m {
        return Err(Error::KExceedsSamples { k, m });
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_pp_seeds(features, k, &mut rng);
    Ok(lloyd(features, seeds, max_iter))
}

/// A fitted partition of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// `(k, I(k))` for every evaluated k, ascending in k.
    pub inertia_by_k: Vec<(usize, f64)>,
    pub chosen_scaled_inertia: f64,
    pub inertia_penalty: f64,
    /// Present when the model was fitted from a dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_prep: Option<FeaturePrep>,
}

impl ClusterModel {
    /// `SI(k)` recomputed from the recorded inertias.
    pub fn scaled_inertia(&self, k: usize) -> Option<f64> {
        let base = self.inertia_by_k.first()?.1;
        let (_, ik) = self.inertia_by_k.iter().find(|(kk, _)| *kk == k)?;
        Some(scaled_inertia(*ik, base, k, self.inertia_penalty))
    }

    pub fn dimension(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &u in &self.assignments {
            sizes[u] += 1;
        }
        sizes
    }
}

fn scaled_inertia(ik: f64, i1: f64, k: usize, a: f64) -> f64 {
    let ratio = if i1 > 0.0 { ik / i1 } else { 0.0 };
    ratio + a * k as f64
}

/// Tries every k in `1..=min(k_max, m)` and keeps the one with the smallest
/// scaled inertia (ties go to the smaller k).
///
/// Each k is fitted from k-means++ seeds and, for k > 1, also warm-started
/// from the previous solution plus the worst-served row; the lower-inertia
/// run wins, so recorded inertias never increase with k.
pub fn select_k(features: ArrayView2<f64>, k_max: usize, a: f64, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let m = features.nrows();
    if m == 0 {
        return Err(Error::KExceedsSamples { k: 1, m });
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if a.is_nan() || a < 0.0 {
        return Err(Error::InvalidArgument(format!("inertia penalty must be >= 0, got {a}")));
    }
    let mut fits: Vec<KMeansFit> = Vec::new();
    for k in 1..=k_max.min(m) {
        let mut fit = kmeans_pp_fit(features, k, seed.wrapping_add(k as u64), max_iter)?;
        if let Some(prev) = fits.last() {
            let (_, d) = nearest(features, prev.centroids.view());
            let worst = d
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            let mut init = prev.centroids.clone();
            init.push_row(features.row(worst)).expect("same width");
            let warm = lloyd(features, init, max_iter);
            if warm.inertia < fit.inertia {
                fit = warm;
            }
        }
        fits.push(fit);
    }
    let base = fits[0].inertia;
    let mut best = 0;
    let mut best_si = f64::INFINITY;
    for (idx, fit) in fits.iter().enumerate() {
        let si = scaled_inertia(fit.inertia, base, idx + 1, a);
        if si < best_si {
            best = idx;
            best_si = si;
        }
    }
    let inertia_by_k = fits.iter().enumerate().map(|(i, f)| (i + 1, f.inertia)).collect();
    let chosen = fits.swap_remove(best);
    Ok(ClusterModel {
        k: best + 1,
        centroids: chosen.centroids.outer_iter().map(|r| r.to_vec()).collect(),
        assignments: chosen.assignments,
        inertia_by_k,
        chosen_scaled_inertia: best_si,
        inertia_penalty: a,
        feature_prep: None,
    })
}

/// Embeds `ds`, selects k and returns the model with its feature preparation attached.
pub fn partition(ds: &Dataset, k_max: usize, a: f64, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let (features, prep) = build_cluster_features(ds);
    let mut model = select_k(features.view(), k_max, a, seed, max_iter)?;
    model.feature_prep = Some(prep);
    Ok(model)
}

/// Nearest centroid for each row of `features` (ties to the lowest index).
pub fn assign(model: &ClusterModel, features: ArrayView2<f64>) -> Result<Vec<usize>> {
    let d = model.dimension();
    if features.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: features.ncols(),
        });
    }
    let centroids = Array2::from_shape_vec((model.k, d), model.centroids.iter().flatten().copied().collect())
        .expect("centroid table is rectangular");
    Ok(nearest(features, centroids.view()).0)
}

/// Total squared deviation from the column means.
pub fn total_sum_of_squares(features: ArrayView2<f64>) -> f64 {
    match features.mean_axis(Axis(0)) {
        Some(mean) => features.outer_iter().map(|x| sq_dist(x, mean.view())).sum(),
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, DatasetSchema};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn one_column(values: &[f64], kind: ColumnSpec) -> Dataset {
        let schema = DatasetSchema::new(vec![kind], "t", vec!["a".into(), "b".into()]).unwrap();
        Dataset::new(schema, values.to_vec(), vec![0; values.len()]).unwrap()
    }

    #[test]
    fn standardizes_continuous() {
        let (f, _) = build_cluster_features(&one_column(&[2.0, 4.0, 6.0], ColumnSpec::continuous("x")));
        // population std of {2,4,6} is sqrt(8/3)
        let s = (8.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(f[[0, 0]], -2.0 / s, epsilon = 1e-12);
        assert_abs_diff_eq!(f[[0, 0]], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(f[[1, 0]], 0.0);
        assert_abs_diff_eq!(f[[2, 0]], 1.2247, epsilon = 1e-4);
    }

    #[test]
    fn one_hot_and_constant_columns() {
        let (f, _) = build_cluster_features(&one_column(
            &[0.0, 2.0, 1.0],
            ColumnSpec::discrete("d", ["p", "q", "r"]),
        ));
        assert_eq!(f, array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        let (f, _) = build_cluster_features(&one_column(&[5.0, 5.0], ColumnSpec::continuous("c")));
        assert!(f.iter().all(|&v| v == 0.0));
    }

    /// Smallest inertia over every 2-partition of the points.
    fn brute_force_two_means(points: ArrayView2<f64>) -> f64 {
        let m = points.nrows();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << m) - 1 {
            let mut total = 0.0;
            for side in [true, false] {
                let idx: Vec<usize> = (0..m).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let sub = points.select(Axis(0), &idx);
                total += total_sum_of_squares(sub.view());
            }
            best = best.min(total);
        }
        best
    }

    #[test]
    fn two_pairs_split_into_two_clusters() {
        let pts = array![[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        let oracle = brute_force_two_means(pts.view());
        assert_abs_diff_eq!(oracle, 1.0, epsilon = 1e-12);
        for seed in 0..10 {
            let fit = kmeans_pp_fit(pts.view(), 2, seed, 300).unwrap();
            assert_abs_diff_eq!(fit.inertia, oracle, epsilon = 1e-12);
            assert_eq!(fit.assignments[0], fit.assignments[1]);
            assert_eq!(fit.assignments[2], fit.assignments[3]);
            assert_ne!(fit.assignments[0], fit.assignments[2]);
        }
    }

    #[test]
    fn degenerate_k() {
        let pts = array![[0.0, 0.0], [3.0, 1.0], [7.0, -2.0]];
        let fit = kmeans_pp_fit(pts.view(), 3, 1, 10).unwrap();
        assert_eq!(fit.inertia, 0.0);
        let fit = kmeans_pp_fit(pts.view(), 1, 1, 10).unwrap();
        assert_abs_diff_eq!(fit.centroids[[0, 0]], 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.centroids[[0, 1]], -1.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(
            kmeans_pp_fit(pts.view(), 4, 0, 10),
            Err(Error::KExceedsSamples { k: 4, m: 3 })
        ));
    }

    fn blobs() -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = Array2::zeros((40, 2));
        for i in 0..40 {
            let c = if i < 20 { 0.0 } else { 20.0 };
            pts[[i, 0]] = c + rng.random::<f64>() * 0.5;
            pts[[i, 1]] = c + rng.random::<f64>() * 0.5;
        }
        pts
    }

    #[test]
    fn selects_two_for_two_blobs() {
        let pts = blobs();
        // independent check: exhaustive inertia is not feasible for 40 points, so
        // use the known split and compare scaled inertias directly
        let i1 = total_sum_of_squares(pts.view());
        let i2 = total_sum_of_squares(pts.slice(ndarray::s![..20, ..]))
            + total_sum_of_squares(pts.slice(ndarray::s![20.., ..]));
        assert!(i2 / i1 + 0.02 < 1.01);
        let model = select_k(pts.view(), 4, 0.01, 3, 300).unwrap();
        assert_eq!(model.k, 2);
        assert_abs_diff_eq!(model.inertia_by_k[1].1, i2, epsilon = 1e-9);
        assert_abs_diff_eq!(model.scaled_inertia(1).unwrap(), 1.01, epsilon = 1e-12);
        let heavy = select_k(pts.view(), 4, 10.0, 3, 300).unwrap();
        assert_eq!(heavy.k, 1);
    }

    #[test]
    fn assign_rules() {
        let model = ClusterModel {
            k: 2,
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0]],
            assignments: vec![],
            inertia_by_k: vec![],
            chosen_scaled_inertia: 0.0,
            inertia_penalty: 0.0,
            feature_prep: None,
        };
        let pts = array![[2.0, 0.0], [1.0, 5.0], [0.0, 0.0]];
        assert_eq!(assign(&model, pts.view()).unwrap(), vec![1, 0, 0]);
        assert!(matches!(
            assign(&model, array![[1.0]].view()),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    proptest! {
        #[test]
        fn lloyd_inertia_monotone(data in prop::collection::vec(-10.0f64..10.0, 6..80), k in 1usize..5, seed: u64) {
            let m = data.len() / 2;
            let pts = Array2::from_shape_vec((m, 2), data[..m * 2].to_vec()).unwrap();
            prop_assume!(k <= m);
            let fit = kmeans_pp_fit(pts.view(), k, seed, 300).unwrap();
            for w in fit.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            prop_assert!(fit.assignments.iter().all(|&u| u < k));
            prop_assert!(fit.centroids.iter().all(|v| v.is_finite()));
        }

        #[test]
        fn select_k_invariants(data in prop::collection::vec(-10.0f64..10.0, 8..60), a in 0.0f64..0.2, seed: u64) {
            let m = data.len() / 2;
            let pts = Array2::from_shape_vec((m, 2), data[..m * 2].to_vec()).unwrap();
            let model = select_k(pts.view(), 6, a, seed, 300).unwrap();
            for w in model.inertia_by_k.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 + 1e-9);
            }
            for &(k, _) in &model.inertia_by_k {
                prop_assert!(model.chosen_scaled_inertia <= model.scaled_inertia(k).unwrap() + 1e-12);
            }
            prop_assert!((model.inertia_by_k[0].1 - total_sum_of_squares(pts.view())).abs() < 1e-8);
        }

        #[test]
        fn duplicates_share_assignments(data in prop::collection::vec(-5.0f64..5.0, 4..40), seed: u64) {
            let m = data.len() / 2;
            let mut doubled = Vec::new();
            for i in 0..m {
                doubled.extend_from_slice(&data[2 * i..2 * i + 2]);
                doubled.extend_from_slice(&data[2 * i..2 * i + 2]);
            }
            let pts = Array2::from_shape_vec((2 * m, 2), doubled).unwrap();
            let model = select_k(pts.view(), 4, 0.01, seed, 300).unwrap();
            for i in 0..m {
                prop_assert_eq!(model.assignments[2 * i], model.assignments[2 * i + 1]);
            }
        }
    }
}
