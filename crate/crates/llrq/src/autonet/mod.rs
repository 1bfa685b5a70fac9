//! Branched autoencoder for soft-bit compression.
//!
//! One encoder maps the K soft bits of a channel use to a 3-dimensional
//! tanh-bounded latent vector; K independent decoders each reconstruct one
//! soft bit from that latent. Training minimizes a weighted relative
//! squared error whose per-bit weights are re-derived from measured
//! reconstruction errors between rounds, then fine-tunes each decoder with
//! the encoder frozen.
//!
//! Everything is plain f64 with hand-written backprop; batches are 2-d
//! arrays with one sample per row.

mod adam;
mod net;
mod serialize;
mod train;

pub use adam::{adam_update, AdamConfig, FullAdam, MlpAdam};
pub use net::{
    sample_loss, total_loss, Activation, BranchedAutoencoder, DenseLayer, Gradients, Mlp,
    MlpGrads, TrainCache, LATENT_DIM,
};
pub use serialize::{load_model, save_model, write_history, FloatWidth};
pub use train::{
    bit_errors, train, update_bit_weights, HistoryRow, Stage2Allocation, TrainConfig,
    TrainOutput, WeightMode, TRAIN_CHUNK,
};
