//! Mismatched information rates, spectral efficiency and the packing
//! optimizer.

mod estimate;
mod optimize;
mod system;

use serde::{Deserialize, Serialize};

pub use estimate::{
    block_rate, estimate_ir, evaluate_point, n0_for_es_n0, observe, prepare_receiver, rate_over, train_for,
    DetectorConfig, IrEstimate, IrOptions, PredistortionConfig, RatePoint, Receiver, ReceiverModel, MIN_BLOCKS,
};
pub use optimize::{
    optimize_packing, refine_axis, Axis, PackingMaximum, PackingResult, SurfaceRow, SweepConfig,
};
pub use system::{nominal_imux_power, simulate_block, simulate_frame, BlockObservation, FrontEnd, System, SystemConfig};

use crate::error::{Error, Result};

/// Spectral efficiency of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SePoint {
    /// b/s/Hz
    pub eta: f64,
    pub bits: f64,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub obo_db: f64,
    pub n_i: f64,
    pub snr_db: f64,
    pub fb_tb: f64,
}

impl SePoint {
    /// `eta` recomputed from the stored fields.
    pub fn recompute(&self) -> f64 {
        self.bits / (self.tau * self.nu * self.fb_tb)
    }
}

/// `eta = I / (tau nu F_B T_B)`.
pub fn eta(bits: f64, tau: f64, nu: f64, t_b: f64, f_b: f64) -> Result<f64> {
    if !(tau > 0.0 && nu > 0.0 && t_b > 0.0 && f_b > 0.0) {
        return Err(Error::param("tau/nu/T_B/F_B", "must be positive"));
    }
    Ok(bits / (tau * nu * t_b * f_b))
}

pub fn spectral_efficiency(ir: &IrEstimate, tau: f64, nu: f64, t_b: f64, f_b: f64) -> Result<SePoint> {
    Ok(SePoint {
        eta: eta(ir.bits_per_channel_use, tau, nu, t_b, f_b)?,
        bits: ir.bits_per_channel_use,
        tau,
        nu,
        w_scale: 1.0,
        obo_db: f64::NAN,
        n_i: 0.0,
        snr_db: f64::NAN,
        fb_tb: f_b * t_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::DVBS2_FB_TB;

    fn ir(bits: f64) -> IrEstimate {
        IrEstimate::from_blocks(&[bits; 20], 100, 6.0, String::new())
    }

    #[test]
    fn table_rows() {
        let p = spectral_efficiency(&ir(1.0), 1.0, 1.0, 1.0, DVBS2_FB_TB).unwrap();
        assert!((p.eta - 0.66).abs() < 0.005);
        let p = spectral_efficiency(&ir(1.0), 0.75, 0.9, 1.0, DVBS2_FB_TB).unwrap();
        assert!((p.eta - 0.98).abs() < 0.005);
        assert!((p.recompute() - p.eta).abs() < 1e-12);
        let p = spectral_efficiency(&ir(5.0 * 8.0 / 9.0), 0.731, 0.95, 1.0, DVBS2_FB_TB).unwrap();
        assert!((p.eta - 4.24).abs() < 0.01, "{}", p.eta);
        assert!(spectral_efficiency(&ir(1.0), 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn estimate_clips_to_alphabet() {
        let e = IrEstimate::from_blocks(&[2.1; 20], 10, 2.0, String::new());
        assert_eq!(e.bits_per_channel_use, 2.0);
        assert!((e.raw_bits - 2.1).abs() < 1e-12);
        assert_eq!(e.k_used, 200);
    }
}
