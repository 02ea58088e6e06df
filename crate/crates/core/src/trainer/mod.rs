//! Adversarial training of the generator/critic pair.

mod latent;
mod losses;
mod probability;

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Graph, Mode};
use crate::config::TrainConfig;
use crate::data::{Dataset, DatasetSchema};
use crate::error::{Error, Result};
use crate::model::{latent_width, CriticNet, GeneratorNet};
use crate::partition::{partition, ClusterModel};
use crate::transform::{Layout, TransformPipeline};

pub use latent::{normal_noise, sample_latent_batch, LatentBatch};
pub use losses::{
    class_loss, cluster_loss, critic_loss, generator_loss, gradient_penalty, packed_interpolates, update_beta,
    CriticLossTerms, GeneratorLossTerms, GP_NORM_EPS,
};
pub use probability::{compute_probability_matrix, ProbabilityMatrix};

pub const CHECKPOINT_FORMAT: &str = "ctdgan-checkpoint/1";

/// Per-batch losses plus their per-epoch means.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub batches_per_epoch: usize,
    pub critic: Vec<f64>,
    pub generator: Vec<f64>,
    /// Cluster-mismatch rate after each batch.
    pub beta: Vec<f64>,
    pub epoch_critic: Vec<f64>,
    pub epoch_generator: Vec<f64>,
}

impl LossHistory {
    fn close_epoch(&mut self) {
        let n = self.batches_per_epoch;
        let mean = |v: &[f64]| v[v.len() - n..].iter().sum::<f64>() / n as f64;
        self.epoch_critic.push(mean(&self.critic));
        self.epoch_generator.push(mean(&self.generator));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub schema_hash: String,
    pub k: usize,
    pub n_classes: usize,
    pub layout: Layout,
}

/// Everything produced by a training run; serializes to one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub header: CheckpointHeader,
    pub schema: DatasetSchema,
    pub cluster_model: ClusterModel,
    pub pipeline: TransformPipeline,
    #[serde(rename = "generator_params")]
    pub generator: GeneratorNet,
    #[serde(rename = "critic_params")]
    pub critic: CriticNet,
    #[serde(rename = "P_s")]
    pub probability_matrix: ProbabilityMatrix,
    pub config: TrainConfig,
    pub loss_history: LossHistory,
}

impl FittedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("inconsistent checkpoint: {msg}")));
        if self.header.format != CHECKPOINT_FORMAT {
            return bad(format!("unknown format `{}`", self.header.format));
        }
        if self.header.schema_hash != self.schema.fingerprint() {
            return bad("schema hash does not match the embedded schema".into());
        }
        if self.header.k != self.pipeline.k || self.header.layout != self.pipeline.layout {
            return bad("header disagrees with the transform pipeline".into());
        }
        if !self.pipeline.matches_schema(&self.schema) {
            return bad("pipeline was fitted on a different schema".into());
        }
        if self.probability_matrix.n_classes() != self.header.n_classes || self.probability_matrix.k() != self.header.k
        {
            return bad("probability matrix shape".into());
        }
        if self.generator.layout != self.pipeline.layout || self.critic.input_width != self.pipeline.width() {
            return bad("network widths".into());
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.header.k
    }

    pub fn n_classes(&self) -> usize {
        self.header.n_classes
    }
}

/// Batch size actually used for `m` rows: the configured size, or the largest
/// multiple of `pac` not exceeding `m`.
pub fn effective_batch_size(m: usize, cfg: &TrainConfig) -> Result<usize> {
    if m >= cfg.batch_size {
        return Ok(cfg.batch_size);
    }
    let b = m / cfg.pac * cfg.pac;
    if b == 0 {
        return Err(Error::InvalidArgument(format!(
            "{m} rows cannot fill a single pack of {}",
            cfg.pac
        )));
    }
    Ok(b)
}

/// Training state between batches.
#[derive(Debug)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub schema: DatasetSchema,
    pub cluster_model: ClusterModel,
    pub pipeline: TransformPipeline,
    pub probability_matrix: ProbabilityMatrix,
    pub generator: GeneratorNet,
    pub critic: CriticNet,
    /// Transformed training rows.
    pub real: Array2<f64>,
    pub batch_size: usize,
    pub beta: f64,
    pub history: LossHistory,
    adam: AdamConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Partitions the data, fits the transform and initializes both networks.
    pub fn new(ds: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let batch_size = effective_batch_size(ds.n_rows(), cfg)?;
        let cluster_model = partition(ds, cfg.k_max, cfg.inertia_penalty, cfg.seed, cfg.kmeans_max_iter)?;
        let pipeline = TransformPipeline::fit(ds, &cluster_model)?;
        let real = pipeline.transform_dataset(ds, &cluster_model.assignments)?;
        let probability_matrix = compute_probability_matrix(
            ds.labels(),
            &cluster_model.assignments,
            ds.schema().n_classes(),
            cluster_model.k,
        )?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let generator = GeneratorNet::new(
            latent_width(cfg.latent_dim, &pipeline.layout),
            cfg.generator_dim,
            pipeline.layout.clone(),
            rng.next_u64(),
        );
        let critic = CriticNet::new(pipeline.width(), cfg.pac, cfg.critic_dim, cfg.dropout, rng.next_u64());
        let adam = AdamConfig {
            learning_rate: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
        };
        Ok(Self {
            cfg: cfg.clone(),
            schema: ds.schema().clone(),
            cluster_model,
            pipeline,
            probability_matrix,
            generator,
            critic,
            history: LossHistory {
                batches_per_epoch: ds.n_rows() / batch_size,
                ..Default::default()
            },
            real,
            batch_size,
            beta: 0.0,
            adam,
            rng,
        })
    }

    fn fake_batch(&mut self) -> Result<Array2<f64>> {
        let latent = sample_latent_batch(
            self.batch_size,
            &self.pipeline.layout,
            self.cfg.latent_dim,
            &mut self.rng,
        );
        let mut g = Graph::new();
        let bound = self.generator.params.bind(&mut g);
        let z = g.leaf(latent.z);
        let out = self.generator.forward(
            &mut g,
            &bound,
            z,
            self.cfg.gumbel_temperature,
            Mode::Train,
            &mut self.rng,
        )?;
        Ok(g.value(out.output).clone())
    }

    fn critic_step(&mut self, rows: &[usize]) -> Result<f64> {
        let real = self.real.select(Axis(0), rows);
        let fake = self.fake_batch()?;
        let mut g = Graph::new();
        let bound = self.critic.params.bind(&mut g);
        let terms = critic_loss(
            &mut g,
            &self.critic,
            &bound,
            &real,
            &fake,
            self.cfg.gp_lambda,
            &mut self.rng,
        )?;
        let loss = g.scalar(terms.total);
        let grads = g.grad(terms.total, &bound)?;
        let grads: Vec<_> = grads.iter().map(|&id| g.value(id).clone()).collect();
        self.critic.params.adam_step(&grads, &self.adam)?;
        Ok(loss)
    }

    fn generator_step(&mut self) -> Result<f64> {
        let latent = sample_latent_batch(
            self.batch_size,
            &self.pipeline.layout,
            self.cfg.latent_dim,
            &mut self.rng,
        );
        let mut g = Graph::new();
        let gen_bound = self.generator.params.bind(&mut g);
        let critic_bound = self.critic.params.bind(&mut g);
        let z = g.leaf(latent.z.clone());
        let out = self.generator.forward(
            &mut g,
            &gen_bound,
            z,
            self.cfg.gumbel_temperature,
            Mode::Train,
            &mut self.rng,
        )?;
        let terms = generator_loss(
            &mut g,
            &out,
            &self.critic,
            &critic_bound,
            &latent.discrete,
            &latent.cluster,
            &latent.class,
            self.beta,
            &mut self.rng,
        )?;
        let loss = g.scalar(terms.total);
        let grads = g.grad(terms.total, &gen_bound)?;
        let grads: Vec<_> = grads.iter().map(|&id| g.value(id).clone()).collect();
        self.generator.params.adam_step(&grads, &self.adam)?;
        if let Some(stats) = &out.batch_stats {
            self.generator.update_running_stats(stats);
        }
        self.beta = update_beta(&latent.cluster, g.value(out.cluster));
        Ok(loss)
    }

    /// Critic update(s) on `rows`, then one generator update.
    /// Returns `(critic loss, generator loss)`.
    pub fn train_batch(&mut self, rows: &[usize]) -> Result<(f64, f64)> {
        let mut critic = self.critic_step(rows)?;
        for _ in 1..self.cfg.critic_steps_per_generator_step {
            let extra = rand::seq::index::sample(&mut self.rng, self.real.nrows(), self.batch_size).into_vec();
            critic = self.critic_step(&extra)?;
        }
        let generator = self.generator_step()?;
        Ok((critic, generator))
    }

    /// One pass over freshly shuffled rows.
    pub fn train_epoch(&mut self, epoch: usize) -> Result<()> {
        let mut order: Vec<usize> = (0..self.real.nrows()).collect();
        order.shuffle(&mut self.rng);
        for batch in 0..self.history.batches_per_epoch {
            let rows = &order[batch * self.batch_size..(batch + 1) * self.batch_size];
            let (c, g) = match self.train_batch(rows) {
                Ok(pair) => pair,
                Err(Error::NonFiniteIntermediate { .. }) => (f64::NAN, f64::NAN),
                Err(e) => return Err(e),
            };
            if !c.is_finite() || !g.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch,
                    critic_loss: c,
                    generator_loss: g,
                });
            }
            self.history.critic.push(c);
            self.history.generator.push(g);
            self.history.beta.push(self.beta);
        }
        self.history.close_epoch();
        log::debug!(
            "epoch {epoch}: critic {:.4} generator {:.4} beta {:.3}",
            self.history.epoch_critic[epoch],
            self.history.epoch_generator[epoch],
            self.beta
        );
        Ok(())
    }

    pub fn finish(self) -> FittedModel {
        FittedModel {
            header: CheckpointHeader {
                format: CHECKPOINT_FORMAT.to_string(),
                schema_hash: self.schema.fingerprint(),
                k: self.cluster_model.k,
                n_classes: self.schema.n_classes(),
                layout: self.pipeline.layout.clone(),
            },
            schema: self.schema,
            cluster_model: self.cluster_model,
            pipeline: self.pipeline,
            generator: self.generator,
            critic: self.critic,
            probability_matrix: self.probability_matrix,
            config: self.cfg,
            loss_history: self.history,
        }
    }
}

/// Full training run.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<FittedModel> {
    let mut trainer = Trainer::new(ds, cfg)?;
    log::info!(
        "training on {} rows: k = {}, batch {}, {} batches per epoch",
        ds.n_rows(),
        trainer.cluster_model.k,
        trainer.batch_size,
        trainer.history.batches_per_epoch
    );
    for epoch in 0..cfg.epochs {
        trainer.train_epoch(epoch)?;
    }
    Ok(trainer.finish())
}
