//! Channel coding chains used to measure quantization cost.

mod alist;
mod interleaver;
mod ldpc;
mod polar;

pub use alist::SparseParityCheck;
pub use interleaver::{deinterleave, interleave, permutation};
pub use ldpc::{BpOutcome, LdpcCode};
pub use polar::PolarCode;
