//! Auxiliary channel laws, channel shortening, and MAP symbol detection.

mod auxiliary;
mod bcjr;
mod memoryless;
mod shortening;

pub use auxiliary::{AuxChannelSpec, UngerboeckSpec};
pub use bcjr::{bcjr_detect, bcjr_with, ungerboeck_log_likelihood, BcjrOptions, PosteriorBlock, STATE_CAP};
pub use memoryless::memoryless_detect;
pub use shortening::{channel_shortening_optimize, gaussian_gmi, truncated_target, CS_FFT_SIZE};
