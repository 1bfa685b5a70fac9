//! Dense layers, the branched autoencoder, and hand-written backprop.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Width of the compressed representation per channel use.
pub const LATENT_DIM: usize = 3;

/// Elementwise nonlinearity of a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply_inplace(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
        }
    }

    /// Derivative expressed through the activation output, which is all the
    /// backward pass keeps around.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            other => Err(Error::invalid_argument(format!(
                "unknown activation code {other}"
            ))),
        }
    }
}

/// Fully connected layer computing `act(x W^T + b)` on row-major batches.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    /// Weight matrix, `out_dim x in_dim`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

impl DenseLayer {
    /// Uniform He initialization for relu layers and uniform Xavier for tanh
    /// layers. Relu biases start at a small positive constant instead of
    /// zero: with zero biases a sample that silences an entire layer leaves
    /// every downstream pre-activation exactly on the relu kink, where the
    /// subgradient is degenerate and units stay dead.
    fn init(out_dim: usize, in_dim: usize, act: Activation, rng: &mut ChaCha8Rng) -> Self {
        let (bound, bias) = match act {
            Activation::Relu => ((6.0 / in_dim as f64).sqrt(), 0.01),
            Activation::Tanh => ((6.0 / (in_dim + out_dim) as f64).sqrt(), 0.0),
        };
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| {
            (rng.gen::<f64>() * 2.0 - 1.0) * bound
        });
        DenseLayer {
            w,
            b: Array1::from_elem(out_dim, bias),
            act,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        self.act.apply_inplace(&mut y);
        y
    }
}

/// Per-layer weight and bias gradients, ordered like `Mlp::layers`.
pub type MlpGrads = Vec<(Array2<f64>, Array1<f64>)>;

/// A plain stack of dense layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Builds relu hidden layers along `dims` with a tanh output layer.
    /// `dims` lists every width from input to output, so it needs at least
    /// two entries.
    fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an mlp needs an input and an output width");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let act = if i == last {
                    Activation::Tanh
                } else {
                    Activation::Relu
                };
                DenseLayer::init(pair[1], pair[0], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut cur = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            cur = layer.forward(cur.view());
        }
        cur
    }

    /// Forward pass keeping every activation. `acts[0]` is the input and
    /// `acts[i + 1]` the output of layer `i`.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap().view());
            acts.push(next);
        }
        acts
    }

    /// Backpropagates `d_out` (gradient w.r.t. the final activation) through
    /// the cached activations. Returns per-layer gradients and the gradient
    /// w.r.t. the input batch. Gradients are sums over the batch rows; the
    /// caller applies whatever normalization it wants.
    pub fn backward(&self, acts: &[Array2<f64>], d_out: Array2<f64>) -> (MlpGrads, Array2<f64>) {
        debug_assert_eq!(acts.len(), self.layers.len() + 1);
        let mut grads: MlpGrads = Vec::with_capacity(self.layers.len());
        let mut d_cur = d_out;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &acts[idx + 1];
            let mut d_pre = d_cur;
            d_pre.zip_mut_with(y, |d, &yv| *d *= layer.act.derivative_from_output(yv));
            let dw = d_pre.t().dot(&acts[idx]);
            let db = d_pre.sum_axis(Axis(0));
            d_cur = d_pre.dot(&layer.w);
            grads.push((dw, db));
        }
        grads.reverse();
        (grads, d_cur)
    }

    fn grads_zeros(&self) -> MlpGrads {
        self.layers
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect()
    }
}

/// Relative squared reconstruction error of a single soft bit.
pub fn sample_loss(reconstructed: f64, target: f64, eps: f64) -> f64 {
    let d = reconstructed - target;
    d * d / (target.abs() + eps)
}

/// Weighted training loss over a batch: for each bit position the sample
/// losses are averaged over the rows, then the per-bit means are combined
/// with the weights `w`.
pub fn total_loss(out: ArrayView2<f64>, target: ArrayView2<f64>, w: &[f64], eps: f64) -> f64 {
    assert_eq!(out.dim(), target.dim());
    assert_eq!(w.len(), out.ncols());
    let batch = out.nrows() as f64;
    let mut acc = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        let mut sum = 0.0;
        for (&o, &t) in out.column(k).iter().zip(target.column(k).iter()) {
            sum += sample_loss(o, t, eps);
        }
        acc += wk * sum / batch;
    }
    acc
}

/// Activation caches from one training forward pass.
pub struct TrainCache {
    /// Encoder activations, input first.
    pub enc_acts: Vec<Array2<f64>>,
    /// What the decoders actually saw: the latent plus training noise.
    pub z_input: Array2<f64>,
    /// Per-decoder activation stacks.
    pub dec_acts: Vec<Vec<Array2<f64>>>,
}

impl TrainCache {
    /// Output column of decoder `k`, one reconstructed soft bit per row.
    pub fn output(&self, k: usize) -> ArrayView2<'_, f64> {
        self.dec_acts[k].last().unwrap().view()
    }
}

/// Gradients for the whole branched net.
pub struct Gradients {
    pub enc: MlpGrads,
    pub dec: Vec<MlpGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &BranchedAutoencoder) -> Self {
        Gradients {
            enc: net.encoder.grads_zeros(),
            dec: net.decoders.iter().map(Mlp::grads_zeros).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.enc.iter_mut().zip(&other.enc) {
            a.0 += &b.0;
            a.1 += &b.1;
        }
        for (da, db) in self.dec.iter_mut().zip(&other.dec) {
            for (a, b) in da.iter_mut().zip(db) {
                a.0 += &b.0;
                a.1 += &b.1;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.enc.iter_mut() {
            g.0 *= s;
            g.1 *= s;
        }
        for d in self.dec.iter_mut() {
            for g in d.iter_mut() {
                g.0 *= s;
                g.1 *= s;
            }
        }
    }
}

/// One shared encoder feeding one single-output decoder per bit position.
#[derive(Clone, Debug)]
pub struct BranchedAutoencoder {
    pub encoder: Mlp,
    pub decoders: Vec<Mlp>,
}

impl BranchedAutoencoder {
    /// Standard geometry: three relu hidden layers of width `4 * bits` in
    /// the encoder and in every decoder.
    pub fn new(bits: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::with_hidden_width(bits, 4 * bits, rng)
    }

    /// Same layer count with an explicit hidden width, mostly for small
    /// test nets.
    pub fn with_hidden_width(bits: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if bits < 2 || bits % 2 != 0 {
            return Err(Error::invalid_argument(format!(
                "bits per channel use must be even and at least 2, got {bits}"
            )));
        }
        if hidden == 0 {
            return Err(Error::invalid_argument("hidden width must be positive"));
        }
        let encoder = Mlp::init(&[bits, hidden, hidden, hidden, LATENT_DIM], rng);
        let decoders = (0..bits)
            .map(|_| Mlp::init(&[LATENT_DIM, hidden, hidden, hidden, 1], rng))
            .collect();
        Ok(BranchedAutoencoder { encoder, decoders })
    }

    /// Number of soft bits per channel use this net was built for.
    pub fn bits(&self) -> usize {
        self.decoders.len()
    }

    /// Latent vectors for a batch of soft-bit rows, without noise.
    pub fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.encoder.forward(x)
    }

    /// Reconstructed soft bits for a batch of latent rows.
    pub fn decode(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((z.nrows(), self.decoders.len()));
        for (k, dec) in self.decoders.iter().enumerate() {
            let col = dec.forward(z);
            out.slice_mut(s![.., k]).assign(&col.column(0));
        }
        out
    }

    /// Encode then decode with a clean latent.
    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.decode(self.encode(x).view())
    }

    /// Training forward pass. When `noise` is given, zero-mean Gaussian
    /// perturbations of that standard deviation are added to the latent
    /// before the decoders see it.
    pub fn forward_train(
        &self,
        x: ArrayView2<f64>,
        noise: Option<(&mut ChaCha8Rng, f64)>,
    ) -> TrainCache {
        let enc_acts = self.encoder.forward_cached(x);
        let mut z_input = enc_acts.last().unwrap().clone();
        if let Some((rng, sigma)) = noise {
            z_input.mapv_inplace(|v| {
                let n: f64 = StandardNormal.sample(rng);
                v + sigma * n
            });
        }
        let dec_acts = self
            .decoders
            .iter()
            .map(|dec| dec.forward_cached(z_input.view()))
            .collect();
        TrainCache {
            enc_acts,
            z_input,
            dec_acts,
        }
    }

    /// Sum over rows of the weighted sample losses for a cached pass.
    pub fn loss_sum(&self, cache: &TrainCache, target: ArrayView2<f64>, w: &[f64], eps: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &wk) in w.iter().enumerate() {
            let out = cache.output(k);
            let mut sum = 0.0;
            for (&o, &t) in out.column(0).iter().zip(target.column(k).iter()) {
                sum += sample_loss(o, t, eps);
            }
            acc += wk * sum;
        }
        acc
    }

    /// Per-bit sums of unweighted sample losses for a cached pass.
    pub fn bit_error_sums(&self, cache: &TrainCache, target: ArrayView2<f64>, eps: f64) -> Vec<f64> {
        (0..self.decoders.len())
            .map(|k| {
                cache
                    .output(k)
                    .column(0)
                    .iter()
                    .zip(target.column(k).iter())
                    .map(|(&o, &t)| sample_loss(o, t, eps))
                    .sum()
            })
            .collect()
    }

    /// Gradients of the row-summed weighted loss for a cached pass. The
    /// caller divides by the batch size to get mean-loss gradients. The
    /// latent noise acts as an additive constant, so gradients pass through
    /// it unchanged.
    pub fn backward(
        &self,
        cache: &TrainCache,
        target: ArrayView2<f64>,
        w: &[f64],
        eps: f64,
    ) -> Gradients {
        let rows = cache.z_input.nrows();
        let mut dz_total: Array2<f64> = Array2::zeros((rows, LATENT_DIM));
        let mut dec_grads = Vec::with_capacity(self.decoders.len());
        for (k, dec) in self.decoders.iter().enumerate() {
            let out = cache.output(k);
            let mut d_out = Array2::zeros((rows, 1));
            for ((d, &o), &t) in d_out
                .column_mut(0)
                .iter_mut()
                .zip(out.column(0).iter())
                .zip(target.column(k).iter())
            {
                *d = w[k] * 2.0 * (o - t) / (t.abs() + eps);
            }
            let (grads, dz) = dec.backward(&cache.dec_acts[k], d_out);
            dz_total += &dz;
            dec_grads.push(grads);
        }
        let (enc_grads, _) = self.encoder.backward(&cache.enc_acts, dz_total);
        Gradients {
            enc: enc_grads,
            dec: dec_grads,
        }
    }
}
