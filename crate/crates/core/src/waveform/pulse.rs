use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};

/// Sampled root-raised-cosine pulse.
///
/// Time is measured in units of the nominal symbol time `T_B`. The pulse has
/// Nyquist period `T_B / bandwidth_scale`, so `bandwidth_scale` stretches the
/// occupied bandwidth `(1 + alpha) / T_B` by that factor while keeping unit
/// energy. `span_symbols` counts Nyquist periods; `samples_per_symbol` counts
/// samples per transmitted symbol, which is `sample_interval *
/// samples_per_symbol` long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub alpha: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
    pub taps: Vec<f64>,
    pub bandwidth_scale: f64,
    pub sample_interval: f64,
}

/// Unit-energy RRC with unit Nyquist period evaluated at `u` periods.
fn rrc_unit(u: f64, alpha: f64) -> f64 {
    if u.abs() < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    if alpha > 0.0 && (u.abs() - 1.0 / (4.0 * alpha)).abs() < 1e-9 {
        let a = PI / (4.0 * alpha);
        return alpha * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * u * (1.0 - alpha)).sin() + 4.0 * alpha * u * (PI * u * (1.0 + alpha)).cos();
    let den = PI * u * (1.0 - (4.0 * alpha * u).powi(2));
    num / den
}

pub fn rrc_pulse(
    alpha: f64,
    span_symbols: usize,
    samples_per_symbol: usize,
    bandwidth_scale: f64,
) -> Result<PulseShape> {
    if samples_per_symbol == 0 {
        return Err(Error::param("samples_per_symbol", "must be positive"));
    }
    realize(alpha, span_symbols, samples_per_symbol, bandwidth_scale, 1.0 / samples_per_symbol as f64)
}

fn realize(
    alpha: f64,
    span_symbols: usize,
    samples_per_symbol: usize,
    bandwidth_scale: f64,
    dt: f64,
) -> Result<PulseShape> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} is outside [0, 1]")));
    }
    if span_symbols < 8 {
        return Err(Error::param("span_symbols", format!("{span_symbols} < 8")));
    }
    if !(bandwidth_scale > 0.0 && bandwidth_scale.is_finite()) {
        return Err(Error::param("bandwidth_scale", "must be positive"));
    }
    let period = 1.0 / bandwidth_scale;
    let half = ((span_symbols as f64 / 2.0) * period / dt + 1e-9).floor() as isize;
    let amp = period.sqrt().recip();
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| amp * rrc_unit(n as f64 * dt / period, alpha))
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum::<f64>() * dt;
    if energy < 0.999 {
        return Err(Error::PulseSpanTooShort {
            span: span_symbols,
            fraction: energy,
        });
    }
    let norm = energy.sqrt().recip();
    taps.iter_mut().for_each(|t| *t *= norm);
    Ok(PulseShape {
        alpha,
        span_symbols,
        samples_per_symbol,
        taps,
        bandwidth_scale,
        sample_interval: dt,
    })
}

impl PulseShape {
    /// Re-sample the same continuous pulse for a transmitted symbol period
    /// `symbol_period` (in `T_B`) split into `samples_per_symbol` samples.
    pub fn realize(&self, symbol_period: f64, samples_per_symbol: usize) -> Result<PulseShape> {
        if !(symbol_period > 0.0) || samples_per_symbol == 0 {
            return Err(Error::param("symbol_period", "must be positive"));
        }
        realize(
            self.alpha,
            self.span_symbols,
            samples_per_symbol,
            self.bandwidth_scale,
            symbol_period / samples_per_symbol as f64,
        )
    }

    pub fn center(&self) -> usize {
        self.taps.len() / 2
    }

    /// Nominal two-sided bandwidth `W = bandwidth_scale * (1 + alpha) / T_B`.
    pub fn nominal_bandwidth(&self) -> f64 {
        self.bandwidth_scale * (1.0 + self.alpha)
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum::<f64>() * self.sample_interval
    }

    pub fn complex_taps(&self) -> Vec<C64> {
        self.taps.iter().map(|&t| C64::new(t, 0.0)).collect()
    }

    /// Sampled autocorrelation `∫ p(t) p(t - lag·dt) dt` at an integer sample lag.
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        if lag >= self.taps.len() {
            return 0.0;
        }
        self.taps[lag..]
            .iter()
            .zip(&self.taps)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.sample_interval
    }

    /// Two-sided bandwidth (in `1/T_B`) outside of which the energy spectrum
    /// stays more than `threshold_db` below its peak.
    pub fn occupied_bandwidth(&self, threshold_db: f64) -> f64 {
        let n = (self.taps.len() * 32).next_power_of_two().max(1 << 15);
        let mut buf = vec![ZERO; n];
        for (b, &t) in buf.iter_mut().zip(&self.taps) {
            *b = C64::new(t, 0.0);
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
        let peak = power.iter().copied().fold(0.0, f64::max);
        let floor = peak * 10f64.powf(-threshold_db.abs() / 10.0);
        let fs = 1.0 / self.sample_interval;
        let edge = (0..=n / 2).rev().find(|&k| power[k] >= floor).unwrap_or(0);
        2.0 * edge as f64 * fs / n as f64
    }
}
