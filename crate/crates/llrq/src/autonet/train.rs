//! Two-stage training of the branched autoencoder.
//!
//! Stage 1 trains everything jointly for several rounds; after each round
//! the per-bit reconstruction errors are measured on the full dataset and
//! turned into fresh loss weights. Stage 2 freezes the encoder and
//! fine-tunes each decoder on its own bit.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamConfig, FullAdam, MlpAdam};
use super::net::{BranchedAutoencoder, Gradients};
use crate::error::{Error, Result};
use crate::modem::llr_of_soft_bit;

/// Rows processed per forward/backward slice. Batches are accumulated in
/// fixed-size slices so activation memory stays bounded no matter how large
/// the batch is, without changing the computed gradient.
pub const TRAIN_CHUNK: usize = 8192;

/// How the per-bit loss weights are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    /// Re-derive weights from measured per-bit errors after every round.
    Adaptive,
    /// Fix weights once, proportional to the reciprocal mean magnitude of
    /// each bit's log-likelihood ratio over the dataset.
    InverseLlrMagnitude,
}

/// How stage-2 fine-tuning epochs are split across decoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage2Allocation {
    /// Every decoder gets the same epoch budget.
    Equal,
    /// Epoch budgets proportional to the final loss weights, each decoder
    /// keeping at least one epoch.
    Proportional,
}

/// Everything that shapes a training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Factor applied to the Adam step size after each stage-1 round, so
    /// round r runs at `lr * lr_decay^(r-1)`. Stage 2 keeps the last
    /// round's rate. 1 disables the decay.
    pub lr_decay: f64,
    /// Standard deviation of the Gaussian perturbation added to the latent
    /// during training only.
    pub latent_noise_sigma: f64,
    /// Stabilizer in the relative-error denominator.
    pub loss_epsilon: f64,
    /// Stage-1 rounds between weight updates.
    pub rounds: usize,
    /// Joint epochs per stage-1 round.
    pub epochs_stage1: usize,
    /// Base per-decoder epoch budget for stage 2.
    pub epochs_stage2: usize,
    pub allocation: Stage2Allocation,
    pub weight_mode: WeightMode,
    pub seed: u64,
    /// Log per-epoch losses to stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8192,
            adam: AdamConfig {
                lr: 3e-3,
                ..AdamConfig::default()
            },
            lr_decay: 0.5,
            latent_noise_sigma: 1e-3,
            loss_epsilon: 1.0,
            rounds: 4,
            epochs_stage1: 35,
            epochs_stage2: 15,
            allocation: Stage2Allocation::Equal,
            weight_mode: WeightMode::Adaptive,
            seed: 1,
            verbose: false,
        }
    }
}

/// One epoch of training history. Stage-1 rows use the joint weighted loss
/// and carry the weights that were active during the epoch; the last epoch
/// of each round also records the freshly measured per-bit errors. Stage-2
/// rows reuse `round` as the 1-based decoder index and report that
/// decoder's unweighted mean loss.
#[derive(Clone, Debug)]
pub struct HistoryRow {
    pub stage: u8,
    pub round: usize,
    pub epoch: usize,
    pub loss: f64,
    pub errors: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A trained net plus the weight trajectory and per-epoch history.
pub struct TrainOutput {
    pub net: BranchedAutoencoder,
    /// Loss weights after initialization and after every round update.
    pub weight_history: Vec<Vec<f64>>,
    pub history: Vec<HistoryRow>,
}

/// Turns measured per-bit errors into normalized loss weights. When every
/// error is zero there is nothing to rebalance, so the previous weights are
/// kept.
pub fn update_bit_weights(errors: &[f64], previous: &[f64]) -> Vec<f64> {
    debug_assert_eq!(errors.len(), previous.len());
    let sum: f64 = errors.iter().sum();
    if sum <= 0.0 {
        return previous.to_vec();
    }
    errors.iter().map(|e| e / sum).collect()
}

/// Mean unweighted reconstruction error per bit position over a dataset,
/// evaluated without latent noise.
pub fn bit_errors(net: &BranchedAutoencoder, data: ArrayView2<f64>, eps: f64) -> Vec<f64> {
    let k = data.ncols();
    let mut sums = vec![0.0; k];
    for start in (0..data.nrows()).step_by(TRAIN_CHUNK) {
        let end = (start + TRAIN_CHUNK).min(data.nrows());
        let chunk = data.slice_axis(Axis(0), (start..end).into());
        let cache = net.forward_train(chunk, None);
        let chunk_sums = net.bit_error_sums(&cache, chunk, eps);
        for (s, c) in sums.iter_mut().zip(chunk_sums) {
            *s += c;
        }
    }
    let n = data.nrows() as f64;
    sums.iter_mut().for_each(|s| *s /= n);
    sums
}

/// Stage-2 epoch budget per decoder.
pub fn stage2_epoch_counts(w: &[f64], base: usize, alloc: Stage2Allocation) -> Vec<usize> {
    match alloc {
        Stage2Allocation::Equal => vec![base; w.len()],
        Stage2Allocation::Proportional => w
            .iter()
            .map(|&wk| ((wk * w.len() as f64 * base as f64).round() as usize).max(1))
            .collect(),
    }
}

/// Soft-bit magnitudes shrink from the first to the last bit of each half
/// of a Gray-labeled square constellation, so the relative-error weights
/// are expected to grow along each half. A violation is worth flagging but
/// is not an error: it happens naturally on nearly converged nets.
fn warn_on_weight_disorder(w: &[f64]) {
    let half = w.len() / 2;
    for half_slice in [&w[..half], &w[half..]] {
        for i in 1..half_slice.len() {
            if half_slice[i] + 1e-9 < half_slice[i - 1] {
                eprintln!(
                    "warning: bit weights are not non-decreasing within a half: {:?}",
                    w
                );
                return;
            }
        }
    }
}

fn initial_weights(data: ArrayView2<f64>, mode: WeightMode) -> Vec<f64> {
    let k = data.ncols();
    match mode {
        WeightMode::Adaptive => vec![1.0 / k as f64; k],
        WeightMode::InverseLlrMagnitude => {
            let inv: Vec<f64> = (0..k)
                .map(|j| {
                    let mean_abs = data
                        .column(j)
                        .iter()
                        .map(|&s| llr_of_soft_bit(s).abs())
                        .sum::<f64>()
                        / data.nrows() as f64;
                    1.0 / mean_abs.max(1e-12)
                })
                .collect();
            let sum: f64 = inv.iter().sum();
            inv.iter().map(|v| v / sum).collect()
        }
    }
}

/// Trains a branched autoencoder on rows of soft bits in `[-1, 1]`.
///
/// The run is fully determined by `cfg.seed`: initialization, epoch
/// shuffles, and latent noise all come from one stream in a fixed order.
pub fn train(data: ArrayView2<f64>, cfg: &TrainConfig) -> Result<TrainOutput> {
    let n = data.nrows();
    let k = data.ncols();
    if k < 2 || k % 2 != 0 {
        return Err(Error::invalid_argument(format!(
            "training data must have an even number of soft-bit columns, got {k}"
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid_argument("batch size must be positive"));
    }
    if n < cfg.batch_size {
        return Err(Error::invalid_argument(format!(
            "dataset has {n} rows but the batch size is {}",
            cfg.batch_size
        )));
    }
    if cfg.rounds == 0 {
        return Err(Error::invalid_argument("at least one round is required"));
    }
    if !(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "lr_decay must be in (0, 1], got {}",
            cfg.lr_decay
        )));
    }
    if let Some(bad) = data.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(Error::DegenerateInput(format!(
            "soft bits must lie in [-1, 1], found {bad}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = BranchedAutoencoder::new(k, &mut rng)?;
    let mut w = initial_weights(data, cfg.weight_mode);
    let mut weight_history = vec![w.clone()];
    let mut history = Vec::new();
    let mut opt = FullAdam::new(&net);
    let mut indices: Vec<usize> = (0..n).collect();

    for round in 1..=cfg.rounds {
        let round_adam = AdamConfig {
            lr: cfg.adam.lr * cfg.lr_decay.powi(round as i32 - 1),
            ..cfg.adam
        };
        for epoch in 1..=cfg.epochs_stage1 {
            indices.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for batch_idx in indices.chunks(cfg.batch_size) {
                let batch = data.select(Axis(0), batch_idx);
                let rows = batch.nrows();
                let mut grads = Gradients::zeros_like(&net);
                for start in (0..rows).step_by(TRAIN_CHUNK) {
                    let end = (start + TRAIN_CHUNK).min(rows);
                    let chunk = batch.slice_axis(Axis(0), (start..end).into());
                    let cache =
                        net.forward_train(chunk, Some((&mut rng, cfg.latent_noise_sigma)));
                    loss_sum += net.loss_sum(&cache, chunk, &w, cfg.loss_epsilon);
                    grads.add_assign(&net.backward(&cache, chunk, &w, cfg.loss_epsilon));
                }
                grads.scale(1.0 / rows as f64);
                opt.step(&mut net, &grads, &round_adam);
            }
            let loss = loss_sum / n as f64;
            if cfg.verbose {
                eprintln!("stage 1 round {round} epoch {epoch}: loss {loss:.6}");
            }
            history.push(HistoryRow {
                stage: 1,
                round,
                epoch,
                loss,
                errors: Vec::new(),
                weights: w.clone(),
            });
        }
        let errors = bit_errors(&net, data, cfg.loss_epsilon);
        if let Some(row) = history.last_mut() {
            row.errors = errors.clone();
        }
        if cfg.weight_mode == WeightMode::Adaptive {
            w = update_bit_weights(&errors, &w);
            warn_on_weight_disorder(&w);
        }
        weight_history.push(w.clone());
    }

    // Stage 2: decoders see frozen latents, so compute them once.
    let mut latents = Array2::zeros((n, super::net::LATENT_DIM));
    for start in (0..n).step_by(TRAIN_CHUNK) {
        let end = (start + TRAIN_CHUNK).min(n);
        let chunk = data.slice_axis(Axis(0), (start..end).into());
        latents
            .slice_axis_mut(Axis(0), (start..end).into())
            .assign(&net.encode(chunk));
    }

    let stage2_adam = AdamConfig {
        lr: cfg.adam.lr * cfg.lr_decay.powi(cfg.rounds as i32 - 1),
        ..cfg.adam
    };
    let budgets = stage2_epoch_counts(&w, cfg.epochs_stage2, cfg.allocation);
    for (dk, &epochs) in budgets.iter().enumerate() {
        let mut opt_k = MlpAdam::new(&net.decoders[dk]);
        for epoch in 1..=epochs {
            indices.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for batch_idx in indices.chunks(cfg.batch_size) {
                let z_batch = latents.select(Axis(0), batch_idx);
                let t_batch: Vec<f64> = batch_idx.iter().map(|&i| data[(i, dk)]).collect();
                let rows = z_batch.nrows();
                let dec = &net.decoders[dk];
                let mut grads: Option<super::net::MlpGrads> = None;
                for start in (0..rows).step_by(TRAIN_CHUNK) {
                    let end = (start + TRAIN_CHUNK).min(rows);
                    let mut z_chunk = z_batch.slice_axis(Axis(0), (start..end).into()).to_owned();
                    z_chunk.mapv_inplace(|v| {
                        let noise: f64 =
                            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                        v + cfg.latent_noise_sigma * noise
                    });
                    let acts = dec.forward_cached(z_chunk.view());
                    let out = acts.last().unwrap();
                    let mut d_out = Array2::zeros((end - start, 1));
                    for (i, row) in (start..end).enumerate() {
                        let t = t_batch[row];
                        let o = out[(i, 0)];
                        loss_sum += super::net::sample_loss(o, t, cfg.loss_epsilon);
                        d_out[(i, 0)] = 2.0 * (o - t) / (t.abs() + cfg.loss_epsilon);
                    }
                    let (g, _) = dec.backward(&acts, d_out);
                    match &mut grads {
                        None => grads = Some(g),
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(&g) {
                                a.0 += &b.0;
                                a.1 += &b.1;
                            }
                        }
                    }
                }
                if let Some(mut g) = grads {
                    let scale = 1.0 / rows as f64;
                    for gr in g.iter_mut() {
                        gr.0 *= scale;
                        gr.1 *= scale;
                    }
                    opt_k.step(&mut net.decoders[dk], &g, &stage2_adam);
                }
            }
            let loss = loss_sum / n as f64;
            if cfg.verbose {
                eprintln!("stage 2 decoder {} epoch {epoch}: loss {loss:.6}", dk + 1);
            }
            history.push(HistoryRow {
                stage: 2,
                round: dk + 1,
                epoch,
                loss,
                errors: Vec::new(),
                weights: w.clone(),
            });
        }
    }

    Ok(TrainOutput {
        net,
        weight_history,
        history,
    })
}
