//! Compression testbed for QAM soft bits.
//!
//! The pipeline: Gray-coded QAM symbols cross a fading channel, the
//! receiver computes exact L-values, converts them to soft bits, and a
//! branched autoencoder squeezes the K soft bits of one channel use into a
//! 3-dimensional latent vector. Scalar codebooks learned by k-means
//! quantize the latent components, and a Monte-Carlo harness measures the
//! block-error-rate cost of the whole construction against classical
//! maximum-mutual-information L-value quantizers, over LDPC and polar
//! coded links.
//!
//! Modules:
//! - [`modem`]: constellations, exact and max-log soft demapping.
//! - [`channel`]: flat Rayleigh and ETU-profile OFDM channel draws.
//! - [`coding`]: LDPC (belief propagation) and polar (list decoding)
//!   chains plus the seeded interleaver.
//! - [`autonet`]: the branched autoencoder, manual backprop, Adam, and the
//!   two-stage training loop.
//! - [`quantizer`]: latent codebooks (mini-batch k-means) and the
//!   maximum-mutual-information scalar baseline.
//! - [`harness`]: experiment config, dataset files, BLER evaluation, CSV
//!   reporting.

pub mod autonet;
pub mod channel;
pub mod coding;
pub mod error;
pub mod harness;
pub mod modem;
pub mod quantizer;

pub use error::{Error, Result};
