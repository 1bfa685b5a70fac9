//! Experiment orchestration: configs, dataset generation, Monte-Carlo
//! block-error-rate evaluation, and result reporting.
//!
//! Everything here is deterministic in the master seed. Per-codeword RNG
//! streams are derived by mixing the master seed with a domain tag and the
//! (SNR, codeword) indices, so every scheme sees exactly the same channel
//! realizations and schemes differ only in how they treat the LLRs.

mod config;
mod dataset;
mod eval;
mod pipeline;
mod report;
mod rng;

pub use config::{fnv1a64, ChannelKind, CodeKind, Config, Scheme};
pub use dataset::{
    generate_dataset, generate_labeled_llrs, read_dataset, write_dataset, DatasetHeader,
    SOFT_BIT_F32_LIMIT,
};
pub use eval::{evaluate, BlerRecord, EvalAssets};
pub use report::{
    parse_results_csv, render_report, snr_at_bler, write_results_csv,
};
pub use rng::{domains, mix_seed, splitmix64};
