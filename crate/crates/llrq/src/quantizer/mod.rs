//! Scalar quantization of latent components and of raw L-values.
//!
//! Two quantizer families live here. The latent path learns a non-uniform
//! scalar codebook per latent component with mini-batch k-means and applies
//! nearest-level quantization, which realizes the product-codebook minimum
//! distance exactly. The baseline path quantizes each L-value directly with
//! a maximum-mutual-information scalar quantizer fitted by dynamic
//! programming over a histogram.

mod kmeans;
mod mmi;

pub use kmeans::{
    distortion, kmeans_fit, kmeans_fit_traced, KmeansConfig, LatentQuantizer, ScalarCodebook,
    LLOYD_PASSES,
};
pub use mmi::{
    binned_mutual_information, empirical_mutual_information, mmi_fit, mmi_fit_columns,
    BitQuantizer, MmiQuantizer, MMI_BINS,
};
