//! Generator and critic networks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{BatchNormMode, BatchStats, Graph, Mode, NodeId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::transform::{Layout, SegmentKind};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f64 = 0.2;

/// Width of the generator input for a given layout: the normal part plus one
/// conditional one-hot per discrete column, the cluster and the class.
pub fn latent_width(latent_dim: usize, layout: &Layout) -> usize {
    latent_dim + layout.width - layout.continuous().width
}

fn uniform_weight(rows: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, fan_in), || dist.sample(rng))
}

/// Running mean and unbiased variance of one batch-norm layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    fn new(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            var: vec![1.0; n],
        }
    }

    fn update(&mut self, batch: &BatchStats) {
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
    }
}

/// Two residual blocks followed by one fused affine for all output heads.
///
/// Block i: `a_i = a_{i-1} ⊕ relu(bn(affine(a_{i-1})))`. Heads read `a_2`:
/// tanh for continuous columns, Gumbel-softmax for each one-hot block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    pub params: ParamStore,
    pub running: [RunningStats; 2],
    pub layout: Layout,
    pub latent_width: usize,
    pub hidden: usize,
}

/// Nodes produced by one generator pass.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    /// Full `B x |x'|` output in layout order.
    pub output: NodeId,
    /// Soft one-hot block per discrete column, in layout order.
    pub discrete: Vec<NodeId>,
    pub cluster: NodeId,
    pub class: NodeId,
    /// Exact logs of the soft blocks above, same order.
    pub discrete_log: Vec<NodeId>,
    pub cluster_log: NodeId,
    pub class_log: NodeId,
    /// Batch statistics of both blocks in training mode.
    pub batch_stats: Option<[BatchStats; 2]>,
}

impl GeneratorNet {
    pub fn new(latent_width: usize, hidden: usize, layout: Layout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d1 = latent_width;
        let d2 = latent_width + hidden;
        let d3 = latent_width + 2 * hidden;
        params.insert("block1.weight", uniform_weight(hidden, d1, &mut rng));
        params.insert("block1.bias", Array2::zeros((1, hidden)));
        params.insert("block1.gamma", Array2::ones((1, hidden)));
        params.insert("block1.beta", Array2::zeros((1, hidden)));
        params.insert("block2.weight", uniform_weight(hidden, d2, &mut rng));
        params.insert("block2.bias", Array2::zeros((1, hidden)));
        params.insert("block2.gamma", Array2::ones((1, hidden)));
        params.insert("block2.beta", Array2::zeros((1, hidden)));
        params.insert("heads.weight", uniform_weight(layout.width, d3, &mut rng));
        params.insert("heads.bias", Array2::zeros((1, layout.width)));
        Self {
            params,
            running: [RunningStats::new(hidden), RunningStats::new(hidden)],
            layout,
            latent_width,
            hidden,
        }
    }

    pub fn output_width(&self) -> usize {
        self.layout.width
    }

    /// Builds the forward pass on `g`, reading parameters from `bound`
    /// (ids from [`ParamStore::bind`]).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        bound: &[NodeId],
        z: NodeId,
        tau: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<GeneratorOutput> {
        let (_, width) = g.shape(z);
        if width != self.latent_width {
            return Err(Error::WidthMismatch {
                expected: self.latent_width,
                actual: width,
            });
        }
        let p = |name: &str| bound[self.params.index(name).expect("generator parameter")];
        let mut a = z;
        let mut stats = Vec::new();
        for (i, block) in ["block1", "block2"].into_iter().enumerate() {
            let h = g.linear(a, p(&format!("{block}.weight")), p(&format!("{block}.bias")))?;
            let bn_mode = match mode {
                Mode::Train => BatchNormMode::Batch { eps: BN_EPS },
                Mode::Eval => BatchNormMode::Running {
                    mean: &self.running[i].mean,
                    var: &self.running[i].var,
                    eps: BN_EPS,
                },
            };
            let (h, s) = g.batch_norm(h, p(&format!("{block}.gamma")), p(&format!("{block}.beta")), bn_mode)?;
            stats.extend(s);
            let h = g.relu(h)?;
            a = g.concat(&[a, h])?;
        }
        let logits = g.linear(a, p("heads.weight"), p("heads.bias"))?;

        let mut parts = Vec::with_capacity(self.layout.segments.len());
        let mut discrete = Vec::new();
        let mut discrete_log = Vec::new();
        let (mut cluster, mut class) = (None, None);
        for seg in &self.layout.segments {
            if seg.width == 0 {
                continue;
            }
            let slice = g.slice_cols(logits, seg.offset, seg.width)?;
            if seg.kind == SegmentKind::Continuous {
                parts.push(g.tanh(slice)?);
                continue;
            }
            let (out, log) = g.gumbel_softmax_with_log(slice, tau, rng)?;
            match seg.kind {
                SegmentKind::Discrete { .. } => {
                    discrete.push(out);
                    discrete_log.push(log);
                }
                SegmentKind::Cluster => cluster = Some((out, log)),
                SegmentKind::Class => class = Some((out, log)),
                SegmentKind::Continuous => unreachable!(),
            }
            parts.push(out);
        }
        let (cluster, cluster_log) = cluster.expect("layout has a cluster block");
        let (class, class_log) = class.expect("layout has a class block");
        let output = g.concat(&parts)?;
        let batch_stats = <[BatchStats; 2]>::try_from(stats).ok();
        Ok(GeneratorOutput {
            output,
            discrete,
            cluster,
            class,
            discrete_log,
            cluster_log,
            class_log,
            batch_stats,
        })
    }

    pub fn update_running_stats(&mut self, stats: &[BatchStats; 2]) {
        for (r, s) in self.running.iter_mut().zip(stats) {
            r.update(s);
        }
    }

    /// Eval-mode generation on a detached latent batch.
    pub fn generate<R: Rng + ?Sized>(&self, z: &Tensor, tau: f64, rng: &mut R) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let zn = g.leaf(z.clone());
        let out = self.forward(&mut g, &bound, zn, tau, Mode::Eval, rng)?;
        Ok(g.value(out.output).clone())
    }
}

/// Packed critic: `pac` consecutive rows form one input.
///
/// `affine -> leaky_relu -> dropout`, twice, then `affine -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub params: ParamStore,
    pub input_width: usize,
    pub pac: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl CriticNet {
    pub fn new(input_width: usize, pac: usize, hidden: usize, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let packed = input_width * pac;
        params.insert("layer1.weight", uniform_weight(hidden, packed, &mut rng));
        params.insert("layer1.bias", Array2::zeros((1, hidden)));
        params.insert("layer2.weight", uniform_weight(hidden, hidden, &mut rng));
        params.insert("layer2.bias", Array2::zeros((1, hidden)));
        params.insert("out.weight", uniform_weight(1, hidden, &mut rng));
        params.insert("out.bias", Array2::zeros((1, 1)));
        Self {
            params,
            input_width,
            pac,
            hidden,
            dropout,
        }
    }

    /// Reshapes a `B x w` batch into `B/pac x pac·w`.
    pub fn pack(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let (b, w) = g.shape(x);
        if w != self.input_width {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                actual: w,
            });
        }
        if b == 0 || b % self.pac != 0 {
            return Err(Error::BatchNotPackable {
                batch: b,
                pac: self.pac,
            });
        }
        g.reshape(x, b / self.pac, self.pac * w)
    }

    /// Scores a `B x w` batch; returns `B/pac x 1`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        bound: &[NodeId],
        x: NodeId,
        mode: Mode,
        rng: &mut R,
    ) -> Result<NodeId> {
        let packed = self.pack(g, x)?;
        self.forward_packed(g, bound, packed, mode, rng)
    }

    /// Scores already packed inputs.
    pub fn forward_packed<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        bound: &[NodeId],
        packed: NodeId,
        mode: Mode,
        rng: &mut R,
    ) -> Result<NodeId> {
        let p = |name: &str| bound[self.params.index(name).expect("critic parameter")];
        let mut h = packed;
        for layer in ["layer1", "layer2"] {
            h = g.linear(h, p(&format!("{layer}.weight")), p(&format!("{layer}.bias")))?;
            h = g.leaky_relu(h, LEAKY_SLOPE)?;
            h = g.dropout(h, self.dropout, mode, rng)?;
        }
        g.linear(h, p("out.weight"), p("out.bias"))
    }

    /// Eval-mode scores of a detached batch.
    pub fn score(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let xn = g.leaf(x.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = self.forward(&mut g, &bound, xn, Mode::Eval, &mut rng)?;
        Ok(g.value(s).iter().copied().collect())
    }
}
