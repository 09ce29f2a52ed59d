//! Iterative detection and decoding with short LDPC codes.

mod ber;
mod ldpc;
mod turbo;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ber::{ber_curve, estimate_ber, wilson_interval, BerLimits, BerPoint, CodedConfig, CodedLink};
pub use ldpc::{DecoderOutput, LdpcCode, PassThrough, SoftDecoder, LLR_CLIP};
pub use turbo::{run_iterative_receiver, soft_bit_information, BitMapper, Guards, TurboOutput};

use crate::error::{Error, Result};
use crate::waveform::ConstellationLabel;

/// Code rate written as `"p/q"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CodeRate {
    pub num: u32,
    pub den: u32,
}

impl CodeRate {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("code rate `{s}` is not of the form p/q with 0 < p < q"));
        let (p, q) = s.split_once('/').ok_or_else(bad)?;
        let num: u32 = p.trim().parse().map_err(|_| bad())?;
        let den: u32 = q.trim().parse().map_err(|_| bad())?;
        if num == 0 || num >= den {
            return Err(bad());
        }
        Ok(CodeRate { num, den })
    }
}

impl TryFrom<String> for CodeRate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CodeRate> for String {
    fn from(r: CodeRate) -> String {
        r.to_string()
    }
}

fn one() -> f64 {
    1.0
}

/// A modulation and coding format with its operating point, as listed in
/// the MODCOD tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModCod {
    pub constellation: ConstellationLabel,
    pub rate: CodeRate,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub w_scale: f64,
    /// Operating `P_sat / N0 F` in dB.
    pub snr_db: f64,
    /// Tabulated spectral efficiency, if any.
    #[serde(default)]
    pub eta: Option<f64>,
}

impl ModCod {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.nu > 0.0 && self.w_scale > 0.0) {
            return Err(Error::Config(format!("{}: tau, nu and w_scale must be positive", self.name())));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("{}: snr_db must be finite", self.name())));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!("{} {}", self.constellation, self.rate)
    }

    /// Information bits per channel use.
    pub fn bits(&self) -> f64 {
        self.rate.value() * (self.constellation.order() as f64).log2()
    }

    /// `eta = r log2 M / (tau nu F_B T_B)`.
    pub fn spectral_efficiency(&self, fb_tb: f64) -> f64 {
        self.bits() / (self.tau * self.nu * fb_tb)
    }
}

/// Global (detector and decoder) and local (decoder) iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationSchedule {
    pub global_iters: usize,
    pub local_iters: usize,
}

impl Default for IterationSchedule {
    fn default() -> Self {
        IterationSchedule {
            global_iters: 5,
            local_iters: 20,
        }
    }
}

impl IterationSchedule {
    pub fn new(global_iters: usize, local_iters: usize) -> Result<Self> {
        let s = IterationSchedule {
            global_iters,
            local_iters,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.global_iters == 0 || self.local_iters == 0 {
            return Err(Error::param("schedule", "global and local iteration counts must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::DVBS2_FB_TB;

    #[test]
    fn rates_parse_and_print() {
        let r: CodeRate = "3/5".parse().unwrap();
        assert_eq!(r, CodeRate { num: 3, den: 5 });
        assert_eq!(r.to_string(), "3/5");
        for bad in ["", "1", "0/2", "3/2", "a/b", "2/2"] {
            assert!(bad.parse::<CodeRate>().is_err(), "{bad}");
        }
    }

    #[test]
    fn modcod_rows_round_trip() {
        let row = r#"{"constellation":"QPSK","rate":"1/2","tau":0.75,"nu":0.9,"w_scale":1.2,"snr_db":2.2,"eta":0.98}"#;
        let m: ModCod = serde_json::from_str(row).unwrap();
        assert!((m.spectral_efficiency(DVBS2_FB_TB) - 0.98).abs() < 0.005);
        let back: ModCod = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ModCod>(r#"{"constellation":"QPSK","rate":"1/2","snr_db":0.1,"extra":1}"#).is_err());
    }

    #[test]
    fn schedule_needs_iterations() {
        assert_eq!(IterationSchedule::new(5, 20).unwrap(), IterationSchedule::default());
        assert!(IterationSchedule::new(0, 20).is_err());
        assert!(IterationSchedule::new(5, 0).is_err());
    }
}
