use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{filter_centered, C64, ZERO};
use crate::error::{Error, Result};

/// Odd-length FIR applied with its center tap at time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fir {
    pub taps: Vec<C64>,
}

impl Fir {
    pub fn identity() -> Self {
        Fir {
            taps: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn new(taps: Vec<C64>) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::param("taps", "FIR length must be odd"));
        }
        Ok(Fir { taps })
    }

    pub fn is_identity(&self) -> bool {
        self.taps.len() == 1 && self.taps[0] == C64::new(1.0, 0.0)
    }

    pub fn half_len(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        if self.is_identity() {
            return x.to_vec();
        }
        filter_centered(x, &self.taps)
    }

    /// Frequency response at `f` (cycles per sample).
    pub fn response(&self, f: f64) -> C64 {
        let c = self.half_len() as f64;
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &h)| h * C64::from_polar(1.0, -2.0 * PI * f * (n as f64 - c)))
            .sum()
    }
}

fn chebyshev_poly(order: u32, x: f64) -> f64 {
    let n = order as f64;
    if x.abs() <= 1.0 {
        (n * x.acos()).cos()
    } else {
        (n * x.abs().acosh()).cosh() * if x < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 }
    }
}

/// Linear-phase lowpass whose magnitude follows a 4th-order Chebyshev type-I
/// response with the given two-sided -3 dB bandwidth.
///
/// Designed by frequency sampling on a dense grid and Hann-windowed to
/// `num_taps` (forced odd). DC gain is normalized to one.
pub fn chebyshev_lowpass(bandwidth_3db: f64, ripple_db: f64, sample_rate: f64, num_taps: usize) -> Result<Fir> {
    if !(bandwidth_3db > 0.0 && bandwidth_3db < sample_rate) {
        return Err(Error::param("bandwidth", "must lie in (0, sample_rate)"));
    }
    if !(ripple_db > 0.0 && ripple_db < 3.0) {
        return Err(Error::param("ripple_db", "must lie in (0, 3) dB"));
    }
    let order = 4;
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let f3 = bandwidth_3db / 2.0;
    let fp = f3 / ((1.0 / eps).acosh() / order as f64).cosh();
    let len = num_taps | 1;
    let n = (len * 16).next_power_of_two().max(4096);
    let mut spec: Vec<C64> = (0..n)
        .map(|k| {
            let kk = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
            let f = kk * sample_rate / n as f64;
            let t = chebyshev_poly(order, f / fp);
            C64::new((1.0 + eps * eps * t * t).sqrt().recip(), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let half = len / 2;
    let mut taps = vec![ZERO; len];
    for (i, tap) in taps.iter_mut().enumerate() {
        let lag = i as isize - half as isize;
        let idx = lag.rem_euclid(n as isize) as usize;
        let window = 0.5 + 0.5 * (PI * lag as f64 / (half as f64 + 1.0)).cos();
        *tap = C64::new(spec[idx].re / n as f64 * window, 0.0);
    }
    let dc: C64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    Fir::new(taps)
}

/// Serializable filter description; bandwidths are in units of `F_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    Flat,
    Chebyshev {
        bandwidth_fb: f64,
        #[serde(default = "default_ripple")]
        ripple_db: f64,
        /// Impulse response length in `T_B`.
        #[serde(default = "default_length")]
        length_tb: f64,
    },
    /// Explicit taps at the simulator sample rate, as `[re, im]` pairs.
    Taps { taps: Vec<[f64; 2]> },
}

fn default_ripple() -> f64 {
    0.2
}

fn default_length() -> f64 {
    8.0
}

impl FilterConfig {
    /// `sample_rate` and `f_b` share units (e.g. both normalized to `1/T_B`).
    pub fn build(&self, sample_rate: f64, f_b: f64) -> Result<Fir> {
        match self {
            FilterConfig::Flat => Ok(Fir::identity()),
            FilterConfig::Chebyshev {
                bandwidth_fb,
                ripple_db,
                length_tb,
            } => {
                let taps = (length_tb * sample_rate).round().max(3.0) as usize;
                chebyshev_lowpass(bandwidth_fb * f_b, *ripple_db, sample_rate, taps)
            }
            FilterConfig::Taps { taps } => Fir::new(taps.iter().map(|t| C64::new(t[0], t[1])).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_hits_its_3db_point() {
        let fs = 10.0;
        let fir = chebyshev_lowpass(1.5, 0.2, fs, 161).unwrap();
        let at_edge = fir.response(0.75 / fs).norm();
        assert!((20.0 * at_edge.log10() + 3.0).abs() < 0.3, "{}", 20.0 * at_edge.log10());
        assert!((fir.response(0.0).norm() - 1.0).abs() < 1e-12);
        assert!(fir.response(2.0 / fs).norm() < 0.05);
        let n = fir.taps.len();
        for i in 0..n {
            assert!((fir.taps[i] - fir.taps[n - 1 - i]).norm() < 1e-15);
        }
    }

    #[test]
    fn even_length_rejected() {
        assert!(Fir::new(vec![ZERO; 4]).is_err());
    }

    #[test]
    fn config_parses() {
        let f: FilterConfig = serde_json::from_str(r#"{"kind":"chebyshev","bandwidth_fb":1.1}"#).unwrap();
        assert!(matches!(f, FilterConfig::Chebyshev { ripple_db, .. } if ripple_db == 0.2));
        let t: FilterConfig = serde_json::from_str(r#"{"kind":"taps","taps":[[0.0,0.0],[1.0,0.0],[0.0,0.0]]}"#).unwrap();
        assert_eq!(t.build(8.0, 1.5).unwrap().taps.len(), 3);
    }
}
