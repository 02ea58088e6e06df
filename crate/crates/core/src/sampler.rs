//! Class-conditional sampling from a trained model and dataset balancing.
//!
//! For a requested class the latent cluster is drawn from that class's row of
//! the probability matrix; a generated row is kept only if its class head
//! agrees with the requested class.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, RngCore};

use crate::data::{Dataset, DatasetSchema};
use crate::error::{Error, Result};
use crate::trainer::{normal_noise, FittedModel, LatentBatch, ProbabilityMatrix};
use crate::transform::{argmax, Layout, TransformPipeline};

/// Largest number of latent rows generated in one pass.
pub const MAX_SAMPLE_CHUNK: usize = 1000;

/// Anything that maps assembled latent batches to model vectors.
pub trait ConditionalGenerator {
    fn layout(&self) -> &Layout;
    /// Width of the normal part of the latent input.
    fn latent_dim(&self) -> usize;
    fn generate(&self, z: &Array2<f64>, rng: &mut dyn RngCore) -> Result<Array2<f64>>;
}

impl ConditionalGenerator for FittedModel {
    fn layout(&self) -> &Layout {
        &self.pipeline.layout
    }

    fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn generate(&self, z: &Array2<f64>, rng: &mut dyn RngCore) -> Result<Array2<f64>> {
        self.generator.generate(z, self.config.gumbel_temperature, rng)
    }
}

/// Copies its conditional blocks to the matching output blocks and emits
/// zeros for continuous columns. `fixed_class` overrides the class block.
#[derive(Debug, Clone)]
pub struct EchoGenerator {
    pub layout: Layout,
    pub latent_dim: usize,
    pub fixed_class: Option<usize>,
}

impl ConditionalGenerator for EchoGenerator {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn generate(&self, z: &Array2<f64>, _rng: &mut dyn RngCore) -> Result<Array2<f64>> {
        let n_c = self.layout.continuous().width;
        let mut out = Array2::zeros((z.nrows(), self.layout.width));
        let cond = z.slice(ndarray::s![.., self.latent_dim..]);
        out.slice_mut(ndarray::s![.., n_c..]).assign(&cond);
        if let Some(y) = self.fixed_class {
            let class = self.layout.class();
            out.slice_mut(ndarray::s![.., class.range()]).fill(0.0);
            out.column_mut(class.offset + y).fill(1.0);
        }
        Ok(out)
    }
}

/// Optional class and discrete-column constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleConditions {
    pub class: Option<usize>,
    /// Schema column index to category index.
    pub discrete: BTreeMap<usize, usize>,
}

impl SampleConditions {
    pub fn for_class(y: usize) -> Self {
        Self {
            class: Some(y),
            ..Default::default()
        }
    }

    /// Resolves string conditions against a schema.
    pub fn from_labels(schema: &DatasetSchema, class: Option<&str>, columns: &[(String, String)]) -> Result<Self> {
        let class = class
            .map(|label| {
                schema
                    .class_index(label)
                    .ok_or_else(|| Error::InvalidCondition(format!("unknown class `{label}`")))
            })
            .transpose()?;
        let mut discrete = BTreeMap::new();
        for (name, value) in columns {
            let c = schema
                .column_index(name)
                .ok_or_else(|| Error::InvalidCondition(format!("unknown column `{name}`")))?;
            let spec = &schema.columns[c];
            if spec.is_continuous() {
                return Err(Error::InvalidCondition(format!("column `{name}` is continuous")));
            }
            let cat = spec
                .categories
                .iter()
                .position(|v| v == value)
                .ok_or_else(|| Error::InvalidCondition(format!("`{value}` is not a category of `{name}`")))?;
            discrete.insert(c, cat);
        }
        Ok(Self { class, discrete })
    }

    fn check(&self, layout: &Layout) -> Result<()> {
        let n_y = layout.class().width;
        if let Some(y) = self.class {
            if y >= n_y {
                return Err(Error::InvalidCondition(format!(
                    "class {y} out of range ({n_y} classes)"
                )));
            }
        }
        for (&c, &cat) in &self.discrete {
            let seg = layout
                .discrete_for_column(c)
                .ok_or_else(|| Error::InvalidCondition(format!("column {c} is not discrete")))?;
            if cat >= seg.width {
                return Err(Error::InvalidCondition(format!(
                    "category {cat} out of range for column {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Accepted rows in raw schema form.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRows {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Cluster decoded from the generated cluster block.
    pub clusters: Vec<usize>,
    /// Cluster written into the latent input.
    pub latent_clusters: Vec<usize>,
    /// Generated rows, accepted or not.
    pub attempts: usize,
}

impl SampledRows {
    /// Share of rows whose discrete values satisfy every column condition.
    pub fn condition_match_rate(&self, cond: &SampleConditions) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        let hits = self
            .rows
            .iter()
            .filter(|r| cond.discrete.iter().all(|(&c, &cat)| r[c] == cat as f64))
            .count();
        hits as f64 / self.rows.len() as f64
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn latent_for<R: Rng + ?Sized>(
    n: usize,
    layout: &Layout,
    latent_dim: usize,
    probs: &ProbabilityMatrix,
    cond: &SampleConditions,
    rng: &mut R,
) -> LatentBatch {
    let normal = normal_noise(n, latent_dim, rng);
    let discrete = layout
        .discrete()
        .iter()
        .map(|seg| {
            let crate::transform::SegmentKind::Discrete { column } = seg.kind else {
                unreachable!()
            };
            match cond.discrete.get(&column) {
                Some(&cat) => vec![cat; n],
                None => (0..n).map(|_| rng.random_range(0..seg.width)).collect(),
            }
        })
        .collect();
    let k = layout.cluster().width;
    let n_y = layout.class().width;
    let mut cluster = Vec::with_capacity(n);
    let mut class = Vec::with_capacity(n);
    for _ in 0..n {
        match cond.class {
            Some(y) => {
                class.push(y);
                cluster.push(probs.sample_cluster(y, rng));
            }
            None => {
                cluster.push(rng.random_range(0..k));
                class.push(rng.random_range(0..n_y));
            }
        }
    }
    LatentBatch::assemble(normal, discrete, cluster, class, layout)
}

/// Rejection sampling of `n` rows with an attempt cap of `n * attempts_factor`.
#[allow(clippy::too_many_arguments)]
pub fn sample_with<G: ConditionalGenerator + ?Sized, R: RngCore>(
    generator: &G,
    pipeline: &TransformPipeline,
    probs: &ProbabilityMatrix,
    n: usize,
    cond: &SampleConditions,
    attempts_factor: usize,
    rng: &mut R,
) -> Result<SampledRows> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let layout = generator.layout();
    cond.check(layout)?;
    let cap = n.saturating_mul(attempts_factor);
    let mut out = SampledRows {
        rows: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        clusters: Vec::with_capacity(n),
        latent_clusters: Vec::with_capacity(n),
        attempts: 0,
    };
    let class_seg = layout.class();
    while out.rows.len() < n {
        if out.attempts >= cap {
            return Err(Error::AcceptanceStalled {
                requested: n,
                accepted: out.rows.len(),
                attempts: out.attempts,
            });
        }
        let chunk = (n - out.rows.len())
            .clamp(100, MAX_SAMPLE_CHUNK)
            .min(cap - out.attempts);
        let latent = latent_for(chunk, layout, generator.latent_dim(), probs, cond, rng);
        let x = generator.generate(&latent.z, rng)?;
        out.attempts += chunk;
        for (i, row) in x.rows().into_iter().enumerate() {
            if out.rows.len() == n {
                break;
            }
            if argmax(row, class_seg) != latent.class[i] {
                continue;
            }
            let decoded = pipeline.inverse_transform_row(row)?;
            out.rows.push(decoded.values);
            out.labels.push(decoded.class);
            out.clusters.push(decoded.cluster);
            out.latent_clusters.push(latent.cluster[i]);
        }
    }
    Ok(out)
}

/// Samples `n` rows from a trained model.
pub fn sample<R: RngCore>(model: &FittedModel, n: usize, cond: &SampleConditions, rng: &mut R) -> Result<SampledRows> {
    sample_with(
        model,
        &model.pipeline,
        &model.probability_matrix,
        n,
        cond,
        model.config.max_sample_attempts_factor,
        rng,
    )
}

/// Sampled rows as a dataset over the model's schema.
pub fn to_dataset(model: &FittedModel, sampled: &SampledRows) -> Result<Dataset> {
    Dataset::from_rows(model.schema.clone(), &sampled.rows, sampled.labels.clone())
}

/// Tops every class up to the majority count with conditioned samples.
/// Original rows come first and are unchanged.
pub fn balance<R: RngCore>(model: &FittedModel, ds: &Dataset, rng: &mut R) -> Result<Dataset> {
    balance_with(
        model,
        &model.pipeline,
        &model.probability_matrix,
        ds,
        model.config.max_sample_attempts_factor,
        rng,
    )
}

pub fn balance_with<G: ConditionalGenerator + ?Sized, R: RngCore>(
    generator: &G,
    pipeline: &TransformPipeline,
    probs: &ProbabilityMatrix,
    ds: &Dataset,
    attempts_factor: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if !pipeline.matches_schema(ds.schema()) {
        return Err(Error::InvalidArgument(
            "dataset schema differs from the one the model was trained on".into(),
        ));
    }
    let counts = ds.class_counts();
    let target = counts.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (y, &c) in counts.iter().enumerate() {
        if c >= target {
            continue;
        }
        let s = sample_with(
            generator,
            pipeline,
            probs,
            target - c,
            &SampleConditions::for_class(y),
            attempts_factor,
            rng,
        )?;
        rows.extend(s.rows);
        labels.extend(s.labels);
    }
    if rows.is_empty() {
        return Ok(ds.clone());
    }
    ds.extended(&rows, &labels)
}
