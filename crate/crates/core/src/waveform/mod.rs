//! Constellations, RRC pulse shaping and multicarrier uplink synthesis.

mod constellation;
mod psd;
mod pulse;
mod synth;

pub use constellation::{build_constellation, Constellation, ConstellationLabel};
pub use psd::{compute_psd, tone, PsdTable};
pub use pulse::{rrc_pulse, PulseShape};
pub use synth::{
    matched_filter_samples, shape_symbols, synthesize_uplink, PackingGrid, SampleBuffer, DVBS2_FB_TB,
};
