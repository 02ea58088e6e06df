//! Downstream classifiers used to score real and synthetic training sets.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Graph, ParamStore, Tensor};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Min-max scaling to [0, 1] for continuous columns and one-hot for discrete
/// ones. Statistics come from the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    ranges: Vec<Option<(f64, f64)>>,
    categories: Vec<usize>,
    width: usize,
}

impl FeatureEncoder {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let schema = train.schema();
        let mut ranges = Vec::with_capacity(schema.n_columns());
        let mut categories = Vec::with_capacity(schema.n_columns());
        let mut width = 0;
        for (j, col) in schema.columns.iter().enumerate() {
            if col.is_continuous() {
                let (lo, hi) = train
                    .rows()
                    .map(|r| r[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                ranges.push(Some((lo, hi)));
                categories.push(0);
                width += 1;
            } else {
                ranges.push(None);
                categories.push(col.categories.len());
                width += col.categories.len();
            }
        }
        Ok(Self {
            ranges,
            categories,
            width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Encodes every row of `ds`. Continuous values outside the training
    /// range extrapolate linearly; a constant column maps to 0.
    pub fn encode(&self, ds: &Dataset) -> Result<Array2<f64>> {
        if ds.n_columns() != self.ranges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ranges.len(),
                actual: ds.n_columns(),
            });
        }
        let mut out = Array2::zeros((ds.n_rows(), self.width));
        for (i, row) in ds.rows().enumerate() {
            let mut offset = 0;
            for (j, &v) in row.iter().enumerate() {
                match self.ranges[j] {
                    Some((lo, hi)) => {
                        out[[i, offset]] = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                        offset += 1;
                    }
                    None => {
                        let c = v as usize;
                        if c < self.categories[j] {
                            out[[i, offset + c]] = 1.0;
                        }
                        offset += self.categories[j];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A classifier over encoded feature matrices.
pub trait Classifier {
    fn fit(&mut self, x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<()>;
    fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            epochs: 100,
            batch_size: 200,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Two ReLU hidden layers and a softmax output, trained with cross-entropy
/// and Adam on shuffled minibatches.
#[derive(Debug, Clone)]
pub struct MlpClassifier {
    pub config: MlpConfig,
    params: Option<ParamStore>,
    n_classes: usize,
}

const LAYERS: [&str; 3] = ["l1", "l2", "l3"];

impl MlpClassifier {
    pub fn new(config: MlpConfig) -> Self {
        Self {
            config,
            params: None,
            n_classes: 0,
        }
    }

    fn init(&self, input: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> ParamStore {
        let h = self.config.hidden;
        let mut params = ParamStore::new();
        for (name, (out, fan_in)) in LAYERS.iter().zip([(h, input), (h, h), (n_classes, h)]) {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            params.insert(
                format!("{name}.weight"),
                Array2::from_shape_simple_fn((out, fan_in), || dist.sample(rng)),
            );
            params.insert(format!("{name}.bias"), Array2::zeros((1, out)));
        }
        params
    }

    fn logits(
        g: &mut Graph,
        params: &ParamStore,
        bound: &[crate::autodiff::NodeId],
        x: Tensor,
    ) -> Result<crate::autodiff::NodeId> {
        let p = |name: &str| bound[params.index(name).expect("known parameter")];
        let mut h = g.leaf(x);
        for (i, name) in LAYERS.iter().enumerate() {
            h = g.linear(h, p(&format!("{name}.weight")), p(&format!("{name}.bias")))?;
            if i + 1 < LAYERS.len() {
                h = g.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Class probabilities, one simplex row per input row.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let params = self.params.as_ref().ok_or(Error::NotFitted)?;
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let logits = Self::logits(&mut g, params, &bound, x.clone())?;
        let probs = g.softmax(logits)?;
        Ok(g.value(probs).clone())
    }
}

impl Classifier for MlpClassifier {
    fn fit(&mut self, x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<()> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: bad,
                size: n_classes,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut params = self.init(x.ncols(), n_classes, &mut rng);
        let adam = AdamConfig {
            learning_rate: self.config.learning_rate,
            ..AdamConfig::default()
        };
        let batch = self.config.batch_size.clamp(1, y.len());
        let mut order: Vec<usize> = (0..y.len()).collect();
        for _ in 0..self.config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let mut g = Graph::new();
                let bound = params.bind(&mut g);
                let logits = Self::logits(&mut g, &params, &bound, xb)?;
                let logp = g.log_softmax(logits)?;
                let loss = g.nll(logp, &yb)?;
                let grads = g.grad(loss, &bound)?;
                let grads: Vec<_> = grads.iter().map(|&id| g.value(id).clone()).collect();
                params.adam_step(&grads, &adam)?;
            }
        }
        self.params = Some(params);
        self.n_classes = n_classes;
        Ok(())
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        Ok(probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// 1-nearest-neighbour baseline under Euclidean distance; the earliest
/// training row wins ties.
#[derive(Debug, Clone, Default)]
pub struct NearestNeighbor {
    train: Option<(Array2<f64>, Vec<usize>)>,
}

impl Classifier for NearestNeighbor {
    fn fit(&mut self, x: &Array2<f64>, y: &[usize], _n_classes: usize) -> Result<()> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.train = Some((x.clone(), y.to_vec()));
        Ok(())
    }

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        let (train, labels) = self.train.as_ref().ok_or(Error::NotFitted)?;
        if x.ncols() != train.ncols() {
            return Err(Error::DimensionMismatch {
                expected: train.ncols(),
                actual: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|q| {
                let d = train.rows().into_iter().map(|t| -(&t - &q).mapv(|v| v * v).sum());
                labels[argmax(d)]
            })
            .collect())
    }
}

/// Which downstream classifier the protocols fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    Mlp(MlpConfig),
    NearestNeighbor,
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Mlp(_) => "mlp",
            ClassifierKind::NearestNeighbor => "1nn",
        }
    }

    /// A fresh classifier; MLP weights are seeded with `seed`.
    pub fn build(&self, seed: u64) -> Box<dyn Classifier> {
        match *self {
            ClassifierKind::Mlp(cfg) => Box::new(MlpClassifier::new(MlpConfig { seed, ..cfg })),
            ClassifierKind::NearestNeighbor => Box::new(NearestNeighbor::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, DatasetSchema};
    use rand_distr::Normal;

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.15).unwrap();
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            let center = if c == 0 { 0.25 } else { 0.75 };
            // redraw until the point clears the separating line x0 + x1 = 1
            loop {
                let (a, b) = (center + noise.sample(&mut rng), center + noise.sample(&mut rng));
                if (a + b - 1.0) * (c as f64 * 2.0 - 1.0) > 0.1 {
                    x[[i, 0]] = a;
                    x[[i, 1]] = b;
                    break;
                }
            }
            y.push(c);
        }
        (x, y)
    }

    fn small() -> MlpConfig {
        MlpConfig {
            hidden: 32,
            epochs: 200,
            batch_size: 50,
            ..MlpConfig::default()
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(200, 3);
        let mut clf = MlpClassifier::new(small());
        clf.fit(&x, &y, 2).unwrap();
        let pred = clf.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
        let probs = clf.predict_proba(&x).unwrap();
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_predictions() {
        let (x, y) = blobs(80, 1);
        let cfg = MlpConfig { epochs: 5, ..small() };
        let mut a = MlpClassifier::new(cfg);
        let mut b = MlpClassifier::new(cfg);
        a.fit(&x, &y, 2).unwrap();
        b.fit(&x, &y, 2).unwrap();
        assert_eq!(a.predict_proba(&x).unwrap(), b.predict_proba(&x).unwrap());
    }

    #[test]
    fn predict_before_fit_fails() {
        let x = Array2::zeros((2, 2));
        assert!(matches!(MlpClassifier::new(small()).predict(&x), Err(Error::NotFitted)));
        assert!(matches!(NearestNeighbor::default().predict(&x), Err(Error::NotFitted)));
    }

    #[test]
    fn nearest_neighbor_recovers_training_labels() {
        let (x, y) = blobs(50, 2);
        let mut nn = NearestNeighbor::default();
        nn.fit(&x, &y, 2).unwrap();
        assert_eq!(nn.predict(&x).unwrap(), y);
    }

    #[test]
    fn encoder_scales_and_one_hots() {
        let schema = DatasetSchema::new(
            vec![ColumnSpec::continuous("a"), ColumnSpec::discrete("b", ["x", "y", "z"])],
            "t",
            vec!["n".into(), "p".into()],
        )
        .unwrap();
        let train = Dataset::from_rows(schema.clone(), &[vec![2.0, 0.0], vec![4.0, 2.0]], vec![0, 1]).unwrap();
        let enc = FeatureEncoder::fit(&train).unwrap();
        assert_eq!(enc.width(), 4);
        let test = Dataset::from_rows(schema, &[vec![3.0, 1.0], vec![6.0, 2.0]], vec![0, 1]).unwrap();
        let x = enc.encode(&test).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![0.5, 0.0, 1.0, 0.0]);
        assert_eq!(x.row(1).to_vec(), vec![2.0, 0.0, 0.0, 1.0]);
    }
}
