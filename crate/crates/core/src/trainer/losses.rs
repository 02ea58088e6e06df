use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Graph, Mode, NodeId, Tensor};
use crate::error::Result;
use crate::model::{CriticNet, GeneratorOutput};

/// Added inside the square root of the input-gradient norm.
pub const GP_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CriticLossTerms {
    pub total: NodeId,
    /// `mean C(fake) - mean C(real)`.
    pub wasserstein: NodeId,
    pub penalty: NodeId,
}

/// Straight-line interpolates between packed real and fake inputs, one
/// mixing weight per pack.
pub fn packed_interpolates<R: Rng + ?Sized>(real: &Tensor, fake: &Tensor, pac: usize, rng: &mut R) -> Tensor {
    let (b, w) = real.dim();
    let packs = b / pac;
    let real = real.to_shape((packs, pac * w)).expect("packable");
    let fake = fake.to_shape((packs, pac * w)).expect("packable");
    let mut out = Array2::zeros((packs, pac * w));
    for p in 0..packs {
        let eps: f64 = rng.random();
        for j in 0..pac * w {
            out[[p, j]] = eps * real[[p, j]] + (1.0 - eps) * fake[[p, j]];
        }
    }
    out
}

/// `lambda * mean over packs of (|grad_x C(x)| - 1)^2` at packed inputs `x`.
pub fn gradient_penalty<R: Rng + ?Sized>(
    g: &mut Graph,
    critic: &CriticNet,
    bound: &[NodeId],
    packed: NodeId,
    lambda: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let scores = critic.forward_packed(g, bound, packed, Mode::Train, rng)?;
    let total = g.sum_all(scores)?;
    let dx = g.input_gradient_node(total, packed)?;
    let norms = g.row_norm(dx, GP_NORM_EPS)?;
    let dev = g.affine(norms, 1.0, -1.0)?;
    let sq = g.square(dev)?;
    let mean = g.mean(sq)?;
    g.scale(mean, lambda)
}

/// Critic objective on detached real and fake batches.
pub fn critic_loss<R: Rng + ?Sized>(
    g: &mut Graph,
    critic: &CriticNet,
    bound: &[NodeId],
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    rng: &mut R,
) -> Result<CriticLossTerms> {
    let real_n = g.leaf(real.clone());
    let fake_n = g.leaf(fake.clone());
    let s_real = critic.forward(g, bound, real_n, Mode::Train, rng)?;
    let s_fake = critic.forward(g, bound, fake_n, Mode::Train, rng)?;
    let m_real = g.mean(s_real)?;
    let m_fake = g.mean(s_fake)?;
    let wasserstein = g.sub(m_fake, m_real)?;
    let mixed = g.leaf(packed_interpolates(real, fake, critic.pac, rng));
    let penalty = gradient_penalty(g, critic, bound, mixed, lambda, rng)?;
    let total = g.add(wasserstein, penalty)?;
    Ok(CriticLossTerms {
        total,
        wasserstein,
        penalty,
    })
}

/// `(1 + beta) * H(z_u, u_hat)` from the log of the soft cluster block; zero
/// for a single cluster. For k = 2 the categorical form equals the binary
/// cross-entropy of the second column, as the block sums to one.
pub fn cluster_loss(g: &mut Graph, cluster_log: NodeId, z_u: &[usize], k: usize, beta: f64) -> Result<NodeId> {
    if k < 2 {
        return Ok(g.constant(1, 1, 0.0));
    }
    let h = g.nll(cluster_log, z_u)?;
    g.scale(h, 1.0 + beta)
}

/// Twice the class cross-entropy, from the log of the soft class block.
pub fn class_loss(g: &mut Graph, class_log: NodeId, z_y: &[usize]) -> Result<NodeId> {
    let h = g.nll(class_log, z_y)?;
    g.scale(h, 2.0)
}

/// Fraction of rows whose hard cluster decision differs from the latent cluster.
pub fn update_beta(z_u: &[usize], cluster_probs: &Tensor) -> f64 {
    if z_u.is_empty() {
        return 0.0;
    }
    let mismatched = cluster_probs
        .rows()
        .into_iter()
        .zip(z_u)
        .filter(|(row, &u)| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best != u
        })
        .count();
    mismatched as f64 / z_u.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorLossTerms {
    pub total: NodeId,
    /// `-mean C(x_hat)`.
    pub adversarial: NodeId,
    /// Sum of per-column cross-entropies of the discrete heads.
    pub discrete: NodeId,
    pub cluster: NodeId,
    pub class: NodeId,
}

/// Generator objective for a forward pass built on the same graph.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss<R: Rng + ?Sized>(
    g: &mut Graph,
    out: &GeneratorOutput,
    critic: &CriticNet,
    critic_bound: &[NodeId],
    discrete_targets: &[Vec<usize>],
    z_u: &[usize],
    z_y: &[usize],
    beta: f64,
    rng: &mut R,
) -> Result<GeneratorLossTerms> {
    let scores = critic.forward(g, critic_bound, out.output, Mode::Train, rng)?;
    let m = g.mean(scores)?;
    let adversarial = g.scale(m, -1.0)?;
    let mut discrete = g.constant(1, 1, 0.0);
    for (&head, targets) in out.discrete_log.iter().zip(discrete_targets) {
        let h = g.nll(head, targets)?;
        discrete = g.add(discrete, h)?;
    }
    let k = g.shape(out.cluster).1;
    let cluster = cluster_loss(g, out.cluster_log, z_u, k, beta)?;
    let class = class_loss(g, out.class_log, z_y)?;
    let mut total = g.add(adversarial, discrete)?;
    total = g.add(total, cluster)?;
    total = g.add(total, class)?;
    Ok(GeneratorLossTerms {
        total,
        adversarial,
        discrete,
        cluster,
        class,
    })
}
