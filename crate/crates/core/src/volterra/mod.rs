//! Simplified Volterra channel model, kernel identification, matched-filter
//! front ends and Gram sequences.

mod gram;
mod kernels;

pub use gram::{
    correlate_bank, feature_covariance, gram_from_kernels, gram_from_pulse, matched_filter_bank, GramSequence,
    StatBlock, MEMORY_THRESHOLD,
};
pub use kernels::{
    identify_kernels, identify_with_support, linear_cascade, min_probe_len, num_kernels, KernelMeta,
    VolterraKernelSet, CONDITION_CAP, SUPPORT_SYMBOLS,
};
