//! Time-frequency packing for nonlinear satellite channels.
//!
//! The crate simulates frequency-multiplexed linear modulations through a
//! per-carrier IMUX/HPA/OMUX transponder chain and measures the spectral
//! efficiency reachable by two receiver families:
//!
//! * data predistortion at the transmitter with a memoryless detector, and
//! * a Volterra-model front end followed by a channel-shortened BCJR detector.
//!
//! Achievable rates are mismatched information rates estimated by Monte
//! Carlo simulation; [`inforate::optimize_packing`] searches time spacing,
//! carrier spacing and pulse bandwidth for the best spectral efficiency.

pub mod channel;
pub mod coded;
pub mod detect;
pub mod dsp;
pub mod error;
pub mod exec;
pub mod inforate;
pub mod predistort;
pub mod seed;
pub mod volterra;
pub mod waveform;

pub use dsp::C64;
pub use error::{Error, Result};
pub use exec::Exec;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
