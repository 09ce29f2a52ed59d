use serde::{Deserialize, Serialize};

use super::filters::{FilterConfig, Fir};
use super::hpa::HpaModel;
use crate::dsp::from_db10;
use crate::error::{Error, Result};
use crate::waveform::SampleBuffer;

/// One carrier's IMUX -> HPA -> OMUX chain at a fixed sample rate.
///
/// The HPA is driven with a fixed input gain so that a signal whose mean
/// power at the IMUX output equals `reference_power` reaches the HPA
/// `input_backoff_db` below input saturation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderSpec {
    pub imux: Fir,
    pub omux: Fir,
    pub hpa: HpaModel,
    pub input_backoff_db: f64,
    pub reference_power: f64,
}

impl TransponderSpec {
    pub fn linear() -> Self {
        TransponderSpec {
            imux: Fir::identity(),
            omux: Fir::identity(),
            hpa: HpaModel::Bypass,
            input_backoff_db: 0.0,
            reference_power: 1.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.hpa.is_bypass()
    }

    /// Amplitude gain applied between the IMUX and the HPA.
    pub fn input_gain(&self) -> f64 {
        match self.hpa.input_saturation() {
            None => 1.0,
            Some(a_sat) => (a_sat * a_sat * from_db10(-self.input_backoff_db) / self.reference_power).sqrt(),
        }
    }

    /// Saturated output power, or the nominal output power of a bypassed HPA.
    pub fn p_sat(&self) -> f64 {
        self.hpa.saturated_power().unwrap_or(self.reference_power)
    }

    pub fn with_backoff(&self, input_backoff_db: f64) -> Self {
        TransponderSpec {
            input_backoff_db,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hpa.validate()?;
        if !(self.reference_power > 0.0 && self.reference_power.is_finite()) {
            return Err(Error::param("reference_power", "must be positive"));
        }
        if !self.input_backoff_db.is_finite() {
            return Err(Error::param("input_backoff_db", "must be finite"));
        }
        Ok(())
    }

    /// The chain on raw samples, without the timing wrapper.
    pub fn apply_samples(&self, x: &[crate::C64]) -> Result<Vec<crate::C64>> {
        let g = self.input_gain();
        let mut v = self.imux.apply(x);
        if g != 1.0 {
            v.iter_mut().for_each(|s| *s *= g);
        }
        let v = self.hpa.apply(&v)?;
        Ok(self.omux.apply(&v))
    }
}

/// `OMUX(HPA(g * IMUX(input)))` on a carrier already shifted to baseband.
pub fn apply_transponder(input: &SampleBuffer, spec: &TransponderSpec) -> Result<SampleBuffer> {
    Ok(input.with_samples(spec.apply_samples(&input.samples)?))
}

/// Serializable transponder description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransponderConfig {
    #[serde(default = "default_imux")]
    pub imux: FilterConfig,
    #[serde(default = "default_omux")]
    pub omux: FilterConfig,
    #[serde(default)]
    pub hpa: HpaModel,
    #[serde(default = "default_ibo")]
    pub input_backoff_db: f64,
}

fn default_imux() -> FilterConfig {
    FilterConfig::Chebyshev {
        bandwidth_fb: 1.0,
        ripple_db: 0.2,
        length_tb: 8.0,
    }
}

fn default_omux() -> FilterConfig {
    FilterConfig::Chebyshev {
        bandwidth_fb: 1.1,
        ripple_db: 0.2,
        length_tb: 8.0,
    }
}

fn default_ibo() -> f64 {
    3.0
}

impl Default for TransponderConfig {
    fn default() -> Self {
        TransponderConfig {
            imux: default_imux(),
            omux: default_omux(),
            hpa: HpaModel::default(),
            input_backoff_db: default_ibo(),
        }
    }
}

impl TransponderConfig {
    pub fn linear() -> Self {
        TransponderConfig {
            imux: FilterConfig::Flat,
            omux: FilterConfig::Flat,
            hpa: HpaModel::Bypass,
            input_backoff_db: 0.0,
        }
    }

    /// Realize at `sample_rate`; `f_b` is the nominal carrier spacing in
    /// the same frequency unit.
    pub fn build(&self, sample_rate: f64, f_b: f64, reference_power: f64) -> Result<TransponderSpec> {
        let spec = TransponderSpec {
            imux: self.imux.build(sample_rate, f_b)?,
            omux: self.omux.build(sample_rate, f_b)?,
            hpa: self.hpa.clone(),
            input_backoff_db: self.input_backoff_db,
            reference_power,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{mean_power, C64, ZERO};
    use crate::waveform::tone;

    fn flat_saleh(reference_power: f64) -> TransponderSpec {
        TransponderSpec {
            hpa: HpaModel::default(),
            reference_power,
            ..TransponderSpec::linear()
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let spec = TransponderConfig::default().build(8.0, 1.5, 1.0).unwrap();
        let buf = tone(0.0, 0.0, 8.0, 64);
        let out = apply_transponder(&buf, &spec).unwrap();
        assert!(out.samples.iter().all(|s| *s == ZERO));
    }

    #[test]
    fn tone_at_saturation_reaches_psat() {
        let amp = 0.37;
        let spec = flat_saleh(amp * amp);
        let out = apply_transponder(&tone(0.1, amp, 4.0, 256), &spec).unwrap();
        assert!((out.mean_power() - spec.p_sat()).abs() < 1e-12);
    }

    #[test]
    fn linear_chain_is_identity() {
        let spec = TransponderSpec::linear();
        let buf = tone(0.3, 2.0, 4.0, 32);
        assert_eq!(apply_transponder(&buf, &spec).unwrap(), buf);
    }

    #[test]
    fn two_tone_third_order_product_matches_saleh_expansion() {
        let fs = 64.0;
        let (f1, f2) = (1.0, 1.5);
        let n = 4096;
        let a = 0.05;
        let x: Vec<C64> = (0..n)
            .map(|m| {
                let t = m as f64 / fs;
                C64::from_polar(a, 2.0 * std::f64::consts::PI * f1 * t)
                    + C64::from_polar(a, 2.0 * std::f64::consts::PI * f2 * t)
            })
            .collect();
        let project = |y: &[C64], f: f64| -> C64 {
            y.iter()
                .enumerate()
                .map(|(m, v)| v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * m as f64 / fs))
                .sum::<C64>()
                / n as f64
        };
        let spec = flat_saleh(1.0);
        let y = spec.apply_samples(&x).unwrap();
        let (alpha_a, beta_a, alpha_phi) = (2.0, 1.0, std::f64::consts::FRAC_PI_3);
        let a3 = C64::new(-alpha_a * beta_a, alpha_a * alpha_phi);
        let expected = a3 * a.powi(3);
        let got = project(&y, 2.0 * f1 - f2);
        assert!((got - expected).norm() / expected.norm() < 0.05, "{got} vs {expected}");

        let bypass = TransponderSpec::linear();
        let y = bypass.apply_samples(&x).unwrap();
        assert!(project(&y, 2.0 * f1 - f2).norm() < 1e-12);
        assert!(mean_power(&y) > 0.0);
    }

    #[test]
    fn hpa_commutes_with_permutation() {
        let spec = flat_saleh(0.5);
        let x: Vec<C64> = (0..50).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let y = spec.apply_samples(&x).unwrap();
        let perm: Vec<usize> = (0..50).map(|i| (i * 17) % 50).collect();
        let xp: Vec<C64> = perm.iter().map(|&i| x[i]).collect();
        let yp = spec.apply_samples(&xp).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(yp[k], y[i]);
        }
    }

    #[test]
    fn config_defaults_fill_in() {
        let cfg: TransponderConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, TransponderConfig::default());
        let err = serde_json::from_str::<TransponderConfig>(r#"{"bogus": 1}"#);
        assert!(err.is_err());
        let table: TransponderConfig = serde_json::from_str(
            r#"{"hpa":{"kind":"table","points":[[-20,-14,2],[0,0,35]]},"imux":{"kind":"flat"}}"#,
        )
        .unwrap();
        assert!(table.build(8.0, 1.5, 1.0).is_ok());
        let bad = serde_json::from_str::<TransponderConfig>(r#"{"hpa":{"kind":"table","points":[[0,0,0]]}}"#);
        assert!(bad.is_err());
    }
}
