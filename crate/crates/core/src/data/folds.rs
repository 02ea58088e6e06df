use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    pub folds: Vec<Fold>,
    /// Classes with fewer members than folds; they are spread over as many
    /// folds as they can fill and some test folds will lack them.
    pub fallback_classes: Vec<usize>,
}

/// Stratified k-fold split.
///
/// Each class is shuffled independently and dealt round-robin over the folds,
/// continuing the deal across classes so fold sizes differ by at most one.
pub fn stratified_folds(ds: &Dataset, n_folds: usize, seed: u64) -> Result<Folds> {
    let m = ds.n_rows();
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_folds > m {
        return Err(Error::FoldCountExceedsRows { n_folds, rows: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = ds.schema().n_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in ds.labels().iter().enumerate() {
        per_class[y].push(i);
    }

    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    let mut fallback = Vec::new();
    let mut next = 0usize;
    for (class, members) in per_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < n_folds {
            fallback.push(class);
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            tests[next % n_folds].push(i);
            next += 1;
        }
    }

    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; m];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..m).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(Folds {
        folds,
        fallback_classes: fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, DatasetSchema};
    use proptest::prelude::*;

    fn dataset(labels: Vec<usize>, n_classes: usize) -> Dataset {
        let schema = DatasetSchema::new(
            vec![ColumnSpec::continuous("a")],
            "t",
            (0..n_classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap();
        let values = (0..labels.len()).map(|i| i as f64).collect();
        Dataset::new(schema, values, labels).unwrap()
    }

    #[test]
    fn exact_divisibility() {
        let ds = dataset([0; 5].into_iter().chain([1; 5]).collect(), 2);
        let folds = stratified_folds(&ds, 5, 3).unwrap();
        assert!(folds.fallback_classes.is_empty());
        for f in &folds.folds {
            let classes: Vec<usize> = f.test.iter().map(|&i| ds.labels()[i]).collect();
            assert_eq!(classes.iter().filter(|&&c| c == 0).count(), 1);
            assert_eq!(classes.iter().filter(|&&c| c == 1).count(), 1);
        }
        assert_eq!(folds, stratified_folds(&ds, 5, 3).unwrap());
    }

    #[test]
    fn too_many_folds() {
        let ds = dataset(vec![0, 1, 0, 1], 2);
        assert!(matches!(
            stratified_folds(&ds, 5, 0),
            Err(Error::FoldCountExceedsRows { n_folds: 5, rows: 4 })
        ));
    }

    #[test]
    fn small_class_is_flagged() {
        let ds = dataset([0; 10].into_iter().chain([1; 2]).collect(), 2);
        let folds = stratified_folds(&ds, 5, 1).unwrap();
        assert_eq!(folds.fallback_classes, vec![1]);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(labels in prop::collection::vec(0usize..3, 15..120), k in 2usize..6, seed: u64) {
            let mut labels = labels;
            labels.extend([0, 1, 2]);
            let ds = dataset(labels, 3);
            let folds = stratified_folds(&ds, k, seed).unwrap();
            let m = ds.n_rows();
            let mut seen = vec![0; m];
            let counts = ds.class_counts();
            for f in &folds.folds {
                prop_assert_eq!(f.train.len() + f.test.len(), m);
                let mut both: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
                both.sort_unstable();
                prop_assert_eq!(both, (0..m).collect::<Vec<_>>());
                for &i in &f.test { seen[i] += 1; }
                for (c, &total) in counts.iter().enumerate() {
                    let in_fold = f.test.iter().filter(|&&i| ds.labels()[i] == c).count() as f64;
                    let expected = total as f64 / k as f64;
                    prop_assert!((in_fold - expected).abs() <= 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
    }
}
