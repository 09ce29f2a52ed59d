use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::transponder::TransponderSpec;
use crate::dsp::{db10, from_db10, C64, ZERO};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::waveform::SampleBuffer;

/// Link-level bookkeeping. The noise `w(t)` has two-sided PSD `2 * n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p_sat: f64,
    pub n0: f64,
    pub spacing: f64,
    pub obo_db: f64,
}

/// `P_sat / (N0 F)` in dB.
pub fn snr_from_budget(budget: &LinkBudget) -> f64 {
    db10(budget.p_sat / (budget.n0 * budget.spacing))
}

/// The `N0` that puts a link at `snr_db`.
pub fn n0_for_snr(p_sat: f64, spacing: f64, snr_db: f64) -> f64 {
    p_sat / (spacing * from_db10(snr_db))
}

/// `10 log10(P_sat / P_out)` for a single post-OMUX carrier.
pub fn measure_obo(spec: &TransponderSpec, modulated: &SampleBuffer) -> Result<f64> {
    let p = modulated.mean_power();
    if !(p > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(db10(spec.p_sat() / p))
}

/// Re-offset every baseband transponder output to `l * spacing` and sum.
/// `outputs[u]` belongs to carrier `l = u - outputs.len() / 2`.
pub fn mux_downlink(outputs: &[SampleBuffer], spacing: f64) -> Result<SampleBuffer> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::param("outputs", "need at least one carrier"))?;
    if outputs
        .iter()
        .any(|b| b.len() != first.len() || b.origin != first.origin || b.sample_rate != first.sample_rate)
    {
        return Err(Error::param("outputs", "carriers must share timing and length"));
    }
    if outputs.len().is_multiple_of(2) {
        return Err(Error::param("outputs", "carrier count must be odd"));
    }
    let span = outputs.len() as f64 * spacing;
    if span >= first.sample_rate {
        return Err(Error::SampleRateInsufficient {
            sample_rate: first.sample_rate,
            bandwidth: span,
            guard: 1.0,
        });
    }
    if outputs.len() == 1 {
        return Ok(first.clone());
    }
    let half = (outputs.len() / 2) as i64;
    let mut total = vec![ZERO; first.len()];
    for (b, l) in outputs.iter().zip(-half..=half) {
        let shifted = b.frequency_shift(l as f64 * spacing);
        for (t, s) in total.iter_mut().zip(&shifted.samples) {
            *t += s;
        }
    }
    Ok(first.with_samples(total))
}

/// Add circular complex Gaussian noise of two-sided PSD `2 * n0`, i.e.
/// per-sample variance `2 * n0 * sample_rate`.
pub fn add_awgn(buf: &SampleBuffer, n0: f64, rng: &mut Rng) -> Result<SampleBuffer> {
    if !(n0 >= 0.0) {
        return Err(Error::param("n0", "must be non-negative"));
    }
    if n0 == 0.0 {
        return Ok(buf.clone());
    }
    let sigma = (n0 * buf.sample_rate).sqrt();
    let samples = buf
        .samples
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            s + C64::new(re, im) * sigma
        })
        .collect();
    Ok(buf.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::waveform::{compute_psd, tone};

    #[test]
    fn snr_formula() {
        let b = LinkBudget {
            p_sat: 1.0,
            n0: 1.0,
            spacing: 1.0,
            obo_db: 0.0,
        };
        assert_eq!(snr_from_budget(&b), 0.0);
        let half = LinkBudget { spacing: 0.5, ..b };
        assert!((snr_from_budget(&half) - 3.0103).abs() < 1e-4);
        let n0 = n0_for_snr(2.0, 1.5, 7.0);
        let back = LinkBudget { p_sat: 2.0, n0, spacing: 1.5, obo_db: 0.0 };
        assert!((snr_from_budget(&back) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn awgn_zero_is_identity_and_seeded() {
        let buf = tone(0.1, 1.0, 8.0, 64);
        let mut rng = seed::stream(1, &[0]);
        assert_eq!(add_awgn(&buf, 0.0, &mut rng).unwrap(), buf);
        let a = add_awgn(&buf, 0.1, &mut seed::stream(9, &[1])).unwrap();
        let b = add_awgn(&buf, 0.1, &mut seed::stream(9, &[1])).unwrap();
        assert_eq!(a, b);
        assert!(add_awgn(&buf, -1.0, &mut rng).is_err());
    }

    #[test]
    fn awgn_psd_is_flat_at_2n0() {
        let fs = 8.0;
        let n0 = 0.05;
        let buf = tone(0.0, 0.0, fs, 1 << 16);
        let noisy = add_awgn(&buf, n0, &mut seed::stream(3, &[])).unwrap();
        let psd = compute_psd(&noisy, 0.1).unwrap();
        let mean = psd.psd.iter().sum::<f64>() / psd.psd.len() as f64;
        assert!((mean / (2.0 * n0) - 1.0).abs() < 0.03, "{mean}");
        let worst = psd.psd.iter().map(|p| (p / (2.0 * n0) - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.5, "{worst}");
    }

    #[test]
    fn obo_of_saturated_tone_is_zero() {
        let spec = TransponderSpec {
            hpa: super::super::HpaModel::default(),
            ..TransponderSpec::linear()
        };
        let out = tone(0.0, 1.0, 4.0, 16);
        assert!(measure_obo(&spec, &out).unwrap().abs() < 1e-12);
        assert!(matches!(measure_obo(&spec, &tone(0.0, 0.0, 4.0, 16)), Err(Error::ZeroPower)));
    }

    #[test]
    fn single_carrier_mux_is_identity() {
        let buf = tone(0.2, 1.0, 8.0, 32);
        assert_eq!(mux_downlink(std::slice::from_ref(&buf), 1.5).unwrap(), buf);
        assert!(mux_downlink(&[buf.clone(), buf.clone(), buf], 3.0).is_err());
    }
}
