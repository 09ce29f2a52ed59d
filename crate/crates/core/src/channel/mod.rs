//! Per-carrier transponder, downlink multiplexing and AWGN.

mod filters;
mod hpa;
mod link;
mod transponder;

pub use filters::{chebyshev_lowpass, FilterConfig, Fir};
pub use hpa::{AmTable, HpaModel};
pub use link::{add_awgn, measure_obo, mux_downlink, n0_for_snr, snr_from_budget, LinkBudget};
pub use transponder::{apply_transponder, TransponderConfig, TransponderSpec};
