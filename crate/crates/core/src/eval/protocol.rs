//! Cross-validated oversampling and fidelity experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierKind, FeatureEncoder, MlpConfig};
use super::metrics::{balanced_accuracy_present, f1_score, percent_difference};
use super::stats::{mean_ranks, ScoreMatrix};
use crate::config::TrainConfig;
use crate::data::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::sampler::{balance, sample, SampleConditions};
use crate::trainer::train;

/// How a training split is turned into the data the classifier sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Use the training split unchanged.
    None,
    /// Oversample with random duplicates of minority rows; in the fidelity
    /// protocol the "synthetic" set is the training split itself.
    Copy,
    /// Fit ctdGAN on the split and sample from it.
    CtdGan(TrainConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Copy => "copy",
            Method::CtdGan(_) => "ctdgan",
        }
    }

    /// Parses `none`, `copy` or `ctdgan`; the latter uses `base` as its
    /// training configuration.
    pub fn parse(name: &str, base: &TrainConfig) -> Result<Self> {
        match name.trim() {
            "none" => Ok(Method::None),
            "copy" => Ok(Method::Copy),
            "ctdgan" => Ok(Method::CtdGan(base.clone())),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected none, copy or ctdgan)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Oversampling,
    Fidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub seeds: Vec<u64>,
    pub n_folds: usize,
    pub classifier: ClassifierKind,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 42],
            n_folds: 5,
            classifier: ClassifierKind::Mlp(MlpConfig::default()),
        }
    }
}

/// Scores of one (seed, fold) unit. In the fidelity protocol the values are
/// percent differences and `None` marks an undefined cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub seed: u64,
    pub fold: usize,
    pub train_rows: usize,
    pub f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub cells: Vec<Cell>,
    /// Mean over folds, one entry per seed.
    pub seed_f1: Vec<Option<f64>>,
    pub seed_balanced_accuracy: Vec<Option<f64>>,
    /// Mean of the per-seed means.
    pub f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub protocol: Protocol,
    pub dataset: String,
    pub config: ProtocolConfig,
    pub methods: Vec<MethodReport>,
    /// Rank of each method on this dataset (1 = best), in `methods` order.
    /// Absent when some aggregate is undefined.
    pub rank_f1: Option<Vec<f64>>,
    pub rank_balanced_accuracy: Option<Vec<f64>>,
}

impl MetricReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Methods x datasets score matrix of one aggregate across several reports
/// of the same protocol and methods.
pub fn score_matrix(reports: &[MetricReport], balanced: bool) -> Result<ScoreMatrix> {
    let Some(first) = reports.first() else {
        return Err(Error::DegenerateInput("no reports".into()));
    };
    let names: Vec<&str> = first.methods.iter().map(|m| m.method.as_str()).collect();
    let mut matrix = vec![Vec::with_capacity(reports.len()); names.len()];
    for r in reports {
        for (i, name) in names.iter().enumerate() {
            let m = r
                .method(name)
                .ok_or_else(|| Error::DegenerateInput(format!("report `{}` lacks method `{name}`", r.dataset)))?;
            matrix[i].push(if balanced { m.balanced_accuracy } else { m.f1 });
        }
    }
    Ok(matrix)
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Seed for the random streams of one (seed, fold) unit.
fn unit_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(fold as u64)
}

/// Class with the fewest rows; the lowest index wins ties.
fn minority_class(labels: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    (0..n_classes).min_by_key(|&c| counts[c]).unwrap_or(0)
}

struct Scores {
    f1: f64,
    balanced_accuracy: f64,
}

/// Fits the classifier on `train_data` and scores it on `test`. Features are
/// scaled with statistics of `scaler_source`.
fn score(
    kind: &ClassifierKind,
    seed: u64,
    scaler_source: &Dataset,
    train_data: &Dataset,
    test: &Dataset,
    positive: usize,
) -> Result<Scores> {
    let encoder = FeatureEncoder::fit(scaler_source)?;
    let n_classes = test.schema().n_classes();
    let mut clf = kind.build(seed);
    clf.fit(&encoder.encode(train_data)?, train_data.labels(), n_classes)?;
    let pred = clf.predict(&encoder.encode(test)?)?;
    Ok(Scores {
        f1: f1_score(test.labels(), &pred, n_classes, positive)?,
        balanced_accuracy: balanced_accuracy_present(test.labels(), &pred, n_classes)?,
    })
}

/// Duplicates random minority rows until every class matches the largest.
fn random_oversample(ds: &Dataset, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    use rand::Rng;
    let counts = ds.class_counts();
    let target = counts.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (y, &c) in counts.iter().enumerate() {
        if c == 0 || c >= target {
            continue;
        }
        let members: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels()[i] == y).collect();
        for _ in c..target {
            rows.push(ds.row(members[rng.random_range(0..members.len())]).to_vec());
            labels.push(y);
        }
    }
    if rows.is_empty() {
        return Ok(ds.clone());
    }
    ds.extended(&rows, &labels)
}

/// A fresh dataset with the class counts of `train`, drawn from ctdGAN.
fn synthesize_like(split: &Dataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let model = train(split, cfg)?;
    let mut rows = Vec::with_capacity(split.n_rows());
    let mut labels = Vec::with_capacity(split.n_rows());
    for (y, &c) in split.class_counts().iter().enumerate() {
        if c == 0 {
            continue;
        }
        let s = sample(&model, c, &SampleConditions::for_class(y), rng)?;
        rows.extend(s.rows);
        labels.extend(s.labels);
    }
    Dataset::from_rows(split.schema().clone(), &rows, labels)
}

fn units(ds: &Dataset, cfg: &ProtocolConfig) -> Result<Vec<(u64, usize, Dataset, Dataset)>> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let folds = stratified_folds(ds, cfg.n_folds, seed)?;
        if !folds.fallback_classes.is_empty() {
            log::warn!(
                "seed {seed}: classes {:?} have fewer rows than folds",
                folds.fallback_classes
            );
        }
        for (f, fold) in folds.folds.iter().enumerate() {
            out.push((seed, f, ds.subset(&fold.train), ds.subset(&fold.test)));
        }
    }
    Ok(out)
}

fn oversampling_cell(
    method: &Method,
    cfg: &ProtocolConfig,
    seed: u64,
    fold: usize,
    train_split: &Dataset,
    test: &Dataset,
) -> Result<Cell> {
    let useed = unit_seed(seed, fold);
    let mut rng = ChaCha8Rng::seed_from_u64(useed ^ 0x5eed);
    let n_classes = train_split.schema().n_classes();
    let positive = minority_class(train_split.labels(), n_classes);
    let augmented = match method {
        Method::None => train_split.clone(),
        Method::Copy => random_oversample(train_split, &mut rng)?,
        Method::CtdGan(tc) => {
            let model = train(
                train_split,
                &TrainConfig {
                    seed: useed,
                    ..tc.clone()
                },
            )?;
            balance(&model, train_split, &mut rng)?
        }
    };
    let s = score(&cfg.classifier, useed, train_split, &augmented, test, positive)?;
    log::info!(
        "oversampling {} seed {seed} fold {fold}: f1 {:.4} bac {:.4}",
        method.name(),
        s.f1,
        s.balanced_accuracy
    );
    Ok(Cell {
        seed,
        fold,
        train_rows: augmented.n_rows(),
        f1: Some(s.f1),
        balanced_accuracy: Some(s.balanced_accuracy),
    })
}

fn fidelity_cell(
    method: &Method,
    cfg: &ProtocolConfig,
    seed: u64,
    fold: usize,
    train_split: &Dataset,
    test: &Dataset,
) -> Result<Cell> {
    let useed = unit_seed(seed, fold);
    let mut rng = ChaCha8Rng::seed_from_u64(useed ^ 0x5eed);
    let n_classes = train_split.schema().n_classes();
    let positive = minority_class(train_split.labels(), n_classes);
    let real = score(&cfg.classifier, useed, train_split, train_split, test, positive)?;
    let synthetic = match method {
        Method::None => {
            return Err(Error::InvalidArgument(
                "the fidelity protocol needs a generative method".into(),
            ))
        }
        Method::Copy => train_split.clone(),
        Method::CtdGan(tc) => synthesize_like(
            train_split,
            &TrainConfig {
                seed: useed,
                ..tc.clone()
            },
            &mut rng,
        )?,
    };
    let synth = score(&cfg.classifier, useed, train_split, &synthetic, test, positive)?;
    let delta = |r: f64, s: f64| match percent_difference(r, s) {
        Ok(v) => Ok(Some(v)),
        Err(Error::DivisionByZeroMetric) => Ok(None),
        Err(e) => Err(e),
    };
    let cell = Cell {
        seed,
        fold,
        train_rows: synthetic.n_rows(),
        f1: delta(real.f1, synth.f1)?,
        balanced_accuracy: delta(real.balanced_accuracy, synth.balanced_accuracy)?,
    };
    log::info!(
        "fidelity {} seed {seed} fold {fold}: df1 {:?} dbac {:?}",
        method.name(),
        cell.f1,
        cell.balanced_accuracy
    );
    Ok(cell)
}

fn summarize(method: &Method, cells: Vec<Cell>, seeds: &[u64]) -> MethodReport {
    let per_seed = |pick: fn(&Cell) -> Option<f64>| -> Vec<Option<f64>> {
        seeds
            .iter()
            .map(|&s| mean(cells.iter().filter(|c| c.seed == s).map(pick)))
            .collect()
    };
    let seed_f1 = per_seed(|c| c.f1);
    let seed_balanced_accuracy = per_seed(|c| c.balanced_accuracy);
    MethodReport {
        method: method.name().to_string(),
        f1: mean(seed_f1.iter().copied()),
        balanced_accuracy: mean(seed_balanced_accuracy.iter().copied()),
        seed_f1,
        seed_balanced_accuracy,
        cells,
    }
}

/// Runs `protocol` for every method. Units run in parallel on the current
/// rayon pool; results are merged in (seed, fold) order, so the report does
/// not depend on scheduling.
pub fn run_experiment(
    protocol: Protocol,
    dataset_name: &str,
    ds: &Dataset,
    methods: &[Method],
    cfg: &ProtocolConfig,
) -> Result<MetricReport> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("at least one method is required".into()));
    }
    let mut names: Vec<&str> = methods.iter().map(Method::name).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("methods must be distinct".into()));
    }
    let units = units(ds, cfg)?;
    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let cells = units
            .par_iter()
            .map(|(seed, fold, tr, te)| match protocol {
                Protocol::Oversampling => oversampling_cell(method, cfg, *seed, *fold, tr, te),
                Protocol::Fidelity => fidelity_cell(method, cfg, *seed, *fold, tr, te),
            })
            .collect::<Result<Vec<_>>>()?;
        reports.push(summarize(method, cells, &cfg.seeds));
    }
    // a lower absolute percent difference is better for fidelity
    let ranks = |pick: fn(&MethodReport) -> Option<f64>| -> Option<Vec<f64>> {
        let matrix: ScoreMatrix = reports
            .iter()
            .map(|m| {
                vec![pick(m).map(|v| match protocol {
                    Protocol::Oversampling => v,
                    Protocol::Fidelity => -v.abs(),
                })]
            })
            .collect();
        mean_ranks(&matrix, true).ok()
    };
    Ok(MetricReport {
        protocol,
        dataset: dataset_name.to_string(),
        config: cfg.clone(),
        rank_f1: ranks(|m| m.f1),
        rank_balanced_accuracy: ranks(|m| m.balanced_accuracy),
        methods: reports,
    })
}

/// Train on balanced folds, score on the held-out fold.
pub fn oversampling_experiment(ds: &Dataset, methods: &[Method], cfg: &ProtocolConfig) -> Result<MetricReport> {
    run_experiment(Protocol::Oversampling, "dataset", ds, methods, cfg)
}

/// Percent change in held-out scores when the classifier is trained on a
/// synthetic copy of the training split instead of the split itself.
pub fn fidelity_experiment(ds: &Dataset, methods: &[Method], cfg: &ProtocolConfig) -> Result<MetricReport> {
    run_experiment(Protocol::Fidelity, "dataset", ds, methods, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::planted_clusters;

    fn quick() -> ProtocolConfig {
        ProtocolConfig {
            seeds: vec![0, 1, 42],
            n_folds: 5,
            classifier: ClassifierKind::Mlp(MlpConfig {
                hidden: 16,
                epochs: 5,
                ..MlpConfig::default()
            }),
        }
    }

    #[test]
    fn protocol_has_one_cell_per_seed_and_fold() {
        let ds = planted_clusters(0).subset(&(0..150).collect::<Vec<_>>());
        let r = oversampling_experiment(&ds, &[Method::None, Method::Copy], &quick()).unwrap();
        for m in &r.methods {
            assert_eq!(m.cells.len(), 15);
            let order: Vec<(u64, usize)> = m.cells.iter().map(|c| (c.seed, c.fold)).collect();
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(order, sorted);
            for c in &m.cells {
                assert!((0.0..=1.0).contains(&c.f1.unwrap()));
                assert!((0.0..=1.0).contains(&c.balanced_accuracy.unwrap()));
            }
        }
        let copy = r.method("copy").unwrap();
        let none = r.method("none").unwrap();
        assert!(copy.cells[0].train_rows > none.cells[0].train_rows);
        let ranks = r.rank_f1.unwrap();
        assert_eq!(ranks.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn aggregate_is_mean_of_seed_means() {
        let ds = planted_clusters(1).subset(&(0..120).collect::<Vec<_>>());
        let r = oversampling_experiment(&ds, &[Method::None], &quick()).unwrap();
        let m = &r.methods[0];
        let manual: f64 = m.seed_f1.iter().map(|v| v.unwrap()).sum::<f64>() / 3.0;
        assert!((m.f1.unwrap() - manual).abs() < 1e-12);
    }

    #[test]
    fn identity_fidelity_is_exactly_zero() {
        let ds = planted_clusters(2).subset(&(0..100).collect::<Vec<_>>());
        let cfg = ProtocolConfig {
            seeds: vec![0],
            ..quick()
        };
        let r = fidelity_experiment(&ds, &[Method::Copy], &cfg).unwrap();
        for c in &r.methods[0].cells {
            assert!(c.f1.is_none_or(|v| v == 0.0));
            assert_eq!(c.balanced_accuracy, Some(0.0));
        }
        assert!(matches!(
            fidelity_experiment(&ds, &[Method::None], &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn experiment_is_reproducible() {
        let ds = planted_clusters(3).subset(&(0..100).collect::<Vec<_>>());
        let cfg = ProtocolConfig {
            seeds: vec![7],
            ..quick()
        };
        let a = oversampling_experiment(&ds, &[Method::Copy], &cfg).unwrap();
        let b = oversampling_experiment(&ds, &[Method::Copy], &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn method_names_parse() {
        let base = TrainConfig::default();
        assert_eq!(Method::parse("none", &base).unwrap(), Method::None);
        assert_eq!(Method::parse("ctdgan", &base).unwrap().name(), "ctdgan");
        assert!(Method::parse("smote", &base).is_err());
    }
}
