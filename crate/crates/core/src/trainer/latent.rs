use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::transform::Layout;

/// A generator input batch together with the conditions encoded in it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    /// Assembled `B x |z|` input: normal noise, then one-hots for each
    /// discrete column, the cluster and the class.
    pub z: Array2<f64>,
    /// Chosen category per discrete column (outer) and row (inner).
    pub discrete: Vec<Vec<usize>>,
    pub cluster: Vec<usize>,
    pub class: Vec<usize>,
}

impl LatentBatch {
    /// Assembles `z` from explicit conditions. `normal` is `B x e`.
    pub fn assemble(
        normal: Array2<f64>,
        discrete: Vec<Vec<usize>>,
        cluster: Vec<usize>,
        class: Vec<usize>,
        layout: &Layout,
    ) -> Self {
        let (b, e) = normal.dim();
        let n_c = layout.continuous().width;
        let width = e + layout.width - n_c;
        let mut z = Array2::zeros((b, width));
        z.slice_mut(ndarray::s![.., ..e]).assign(&normal);
        // conditional blocks share the layout order, shifted past the noise
        let shift = |offset: usize| e + offset - n_c;
        for (seg, picks) in layout.discrete().iter().zip(&discrete) {
            for (i, &c) in picks.iter().enumerate() {
                z[[i, shift(seg.offset) + c]] = 1.0;
            }
        }
        let (cs, ys) = (layout.cluster(), layout.class());
        for i in 0..b {
            z[[i, shift(cs.offset) + cluster[i]]] = 1.0;
            z[[i, shift(ys.offset) + class[i]]] = 1.0;
        }
        Self {
            z,
            discrete,
            cluster,
            class,
        }
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }
}

pub fn normal_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Draws a training batch: normal noise and uniformly chosen conditions.
pub fn sample_latent_batch<R: Rng + ?Sized>(b: usize, layout: &Layout, latent_dim: usize, rng: &mut R) -> LatentBatch {
    let normal = normal_noise(b, latent_dim, rng);
    let discrete = layout
        .discrete()
        .iter()
        .map(|seg| (0..b).map(|_| rng.random_range(0..seg.width)).collect())
        .collect();
    let k = layout.cluster().width;
    let n_y = layout.class().width;
    let cluster = (0..b).map(|_| rng.random_range(0..k)).collect();
    let class = (0..b).map(|_| rng.random_range(0..n_y)).collect();
    LatentBatch::assemble(normal, discrete, cluster, class, layout)
}
