use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pulse::PulseShape;
use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};

/// `F_B * T_B` for 27.5 Mbaud symbols on a 41.5 MHz carrier grid.
pub const DVBS2_FB_TB: f64 = 41.5 / 27.5;

/// Time/frequency spacings and their normalizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingGrid {
    /// `T / T_B`
    pub tau: f64,
    /// `F / F_B`
    pub nu: f64,
    pub t_b: f64,
    pub f_b: f64,
    pub num_users: usize,
    /// Symbols per user per simulated block.
    pub block_len: usize,
}

impl Default for PackingGrid {
    fn default() -> Self {
        PackingGrid {
            tau: 1.0,
            nu: 1.0,
            t_b: 1.0,
            f_b: DVBS2_FB_TB,
            num_users: 5,
            block_len: 1000,
        }
    }
}

impl PackingGrid {
    pub fn new(tau: f64, nu: f64, num_users: usize) -> Result<Self> {
        let grid = PackingGrid {
            tau,
            nu,
            num_users,
            ..Default::default()
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", "must be positive"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param("nu", "must be positive"));
        }
        if !(self.t_b > 0.0 && self.f_b > 0.0) {
            return Err(Error::param("t_b/f_b", "must be positive"));
        }
        // A single carrier is allowed for probes; interference studies use >= 3.
        if self.num_users.is_multiple_of(2) {
            return Err(Error::param("num_users", "must be odd so user 0 sits in the middle"));
        }
        if self.block_len == 0 {
            return Err(Error::param("block_len", "must be positive"));
        }
        Ok(())
    }

    /// Symbol time `T` in seconds.
    pub fn symbol_period(&self) -> f64 {
        self.tau * self.t_b
    }

    /// Carrier spacing `F` in Hz.
    pub fn spacing(&self) -> f64 {
        self.nu * self.f_b
    }

    /// Carrier indices `l`, centered on user 0.
    pub fn user_indices(&self) -> impl Iterator<Item = i64> + Clone {
        let half = (self.num_users / 2) as i64;
        -half..=half
    }

    /// Position of user 0 in a per-user vector.
    pub fn center_user(&self) -> usize {
        self.num_users / 2
    }

    /// Samples per transmitted symbol so that the rate is at least
    /// `oversampling / T_B` and exceeds `guard * (U*F + W)`.
    pub fn samples_per_symbol(&self, pulse: &PulseShape, oversampling: usize, guard: f64) -> usize {
        let bandwidth = self.num_users as f64 * self.spacing() + pulse.nominal_bandwidth() / self.t_b;
        let by_os = (oversampling as f64 * self.tau - 1e-9).ceil() as usize;
        let by_bw = (guard * bandwidth * self.symbol_period()).floor() as usize + 1;
        by_os.max(by_bw).max(2)
    }
}

/// Complex baseband samples. Sample `origin` is time zero, where symbol 0 of
/// every user is centered; symbol `k` sits at `origin + k * samples_per_symbol`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<C64>,
    pub sample_rate: f64,
    pub center_offset: f64,
    pub origin: usize,
    pub samples_per_symbol: usize,
}

impl SampleBuffer {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        crate::dsp::mean_power(&self.samples)
    }

    /// Same timing, different samples.
    pub fn with_samples(&self, samples: Vec<C64>) -> SampleBuffer {
        SampleBuffer {
            samples,
            sample_rate: self.sample_rate,
            center_offset: self.center_offset,
            origin: self.origin,
            samples_per_symbol: self.samples_per_symbol,
        }
    }

    /// Multiply by `exp(j 2 pi f t)`, with `t = 0` at `origin`.
    pub fn frequency_shift(&self, f: f64) -> SampleBuffer {
        if f == 0.0 {
            return self.clone();
        }
        let w = 2.0 * PI * f / self.sample_rate;
        let origin = self.origin as f64;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(m, &s)| s * C64::from_polar(1.0, w * (m as f64 - origin)))
            .collect();
        SampleBuffer {
            center_offset: self.center_offset + f,
            ..self.with_samples(samples)
        }
    }

    pub fn symbol_index(&self, k: usize) -> usize {
        self.origin + k * self.samples_per_symbol
    }
}

/// Extra samples kept beyond the pulse tails so downstream filters see the
/// whole burst.
const EDGE_PAD_SYMBOLS: usize = 8;

/// Synthesize the frequency-multiplexed uplink: every user's symbols shaped by
/// `pulse` at spacing `T` and placed on carrier `l * F`.
///
/// `symbols[u]` holds the symbols of user `l = u - num_users / 2`; `pulse`
/// must already be realized for this grid's symbol period.
pub fn synthesize_uplink(symbols: &[Vec<C64>], grid: &PackingGrid, pulse: &PulseShape) -> Result<SampleBuffer> {
    grid.validate()?;
    if symbols.len() != grid.num_users {
        return Err(Error::param(
            "symbols",
            format!("{} users supplied for a {}-user grid", symbols.len(), grid.num_users),
        ));
    }
    let k_len = symbols[0].len();
    if symbols.iter().any(|s| s.len() != k_len) {
        return Err(Error::param("symbols", "all users need the same block length"));
    }
    let sps = pulse.samples_per_symbol;
    let dt = pulse.sample_interval * grid.t_b;
    if ((dt * sps as f64) / grid.symbol_period() - 1.0).abs() > 1e-9 {
        return Err(Error::param(
            "pulse",
            "pulse is not realized for this grid's symbol period",
        ));
    }
    let sample_rate = 1.0 / dt;
    let bandwidth = grid.num_users as f64 * grid.spacing() + pulse.nominal_bandwidth() / grid.t_b;
    if sample_rate <= bandwidth {
        return Err(Error::SampleRateInsufficient {
            sample_rate,
            bandwidth,
            guard: 1.0,
        });
    }
    let mut total: Option<SampleBuffer> = None;
    for (user_syms, l) in symbols.iter().zip(grid.user_indices()) {
        let base = shape_symbols(user_syms, pulse, grid.t_b);
        let shifted = base.frequency_shift(l as f64 * grid.spacing());
        match total.as_mut() {
            None => total = Some(shifted),
            Some(t) => t.samples.iter_mut().zip(&shifted.samples).for_each(|(a, b)| *a += b),
        }
    }
    let mut total = total.expect("at least one user");
    total.center_offset = 0.0;
    Ok(total)
}

/// Pulse-shape one baseband symbol stream; symbol `k` is centered at
/// `origin + k * samples_per_symbol`.
pub fn shape_symbols(symbols: &[C64], pulse: &PulseShape, t_b: f64) -> SampleBuffer {
    let sps = pulse.samples_per_symbol;
    let c = pulse.center();
    let origin = c + EDGE_PAD_SYMBOLS * sps;
    let len = 2 * origin + symbols.len().saturating_sub(1) * sps + 1;
    let mut base = vec![ZERO; len];
    for (k, &x) in symbols.iter().enumerate() {
        let start = origin + k * sps - c;
        for (b, &t) in base[start..start + pulse.taps.len()].iter_mut().zip(&pulse.taps) {
            *b += x * t;
        }
    }
    SampleBuffer {
        samples: base,
        sample_rate: 1.0 / (pulse.sample_interval * t_b),
        center_offset: 0.0,
        origin,
        samples_per_symbol: sps,
    }
}

/// Correlate `buf` against a real pulse at every symbol instant `k < count`.
pub fn matched_filter_samples(buf: &SampleBuffer, pulse: &PulseShape, count: usize) -> Vec<C64> {
    let c = pulse.center();
    let dt = 1.0 / buf.sample_rate;
    (0..count)
        .map(|k| {
            let start = buf.symbol_index(k) as isize - c as isize;
            pulse
                .taps
                .iter()
                .enumerate()
                .filter_map(|(j, &t)| {
                    let m = start + j as isize;
                    (m >= 0 && (m as usize) < buf.len()).then(|| buf.samples[m as usize] * t)
                })
                .sum::<C64>()
                * dt
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{build_constellation, rrc_pulse, ConstellationLabel};
    use rand::{Rng, SeedableRng};

    fn random_symbols(users: usize, k: usize, seed: u64) -> Vec<Vec<C64>> {
        let c = build_constellation(ConstellationLabel::Qpsk, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..users)
            .map(|_| (0..k).map(|_| c.points[rng.random_range(0..4)]).collect())
            .collect()
    }

    #[test]
    fn single_user_orthogonal_recovers_symbols() {
        let grid = PackingGrid::new(1.0, 1.0, 1).unwrap();
        let pulse = rrc_pulse(0.2, 32, 8, 1.0).unwrap();
        let syms = random_symbols(1, 200, 1);
        let buf = synthesize_uplink(&syms, &grid, &pulse).unwrap();
        let y = matched_filter_samples(&buf, &pulse, 200);
        for (a, b) in y.iter().zip(&syms[0]) {
            assert!((a - b).norm() < 1e-2, "{a} vs {b}");
        }
    }

    #[test]
    fn packed_symbol_rate() {
        let grid = PackingGrid::new(0.75, 0.9, 3).unwrap();
        let proto = rrc_pulse(0.2, 16, 8, 1.0).unwrap();
        let sps = grid.samples_per_symbol(&proto, 8, 1.05);
        let pulse = proto.realize(grid.symbol_period(), sps).unwrap();
        let buf = synthesize_uplink(&random_symbols(3, 10, 2), &grid, &pulse).unwrap();
        let symbol_rate = buf.sample_rate / sps as f64;
        assert!((symbol_rate - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn synthesis_is_linear() {
        let grid = PackingGrid::new(0.8, 0.95, 3).unwrap();
        let proto = rrc_pulse(0.2, 16, 8, 1.0).unwrap();
        let pulse = proto.realize(0.8, grid.samples_per_symbol(&proto, 8, 1.05)).unwrap();
        let syms = random_symbols(3, 50, 3);
        let a = C64::new(0.5, -2.0);
        let scaled: Vec<Vec<C64>> = syms.iter().map(|u| u.iter().map(|x| x * a).collect()).collect();
        let lhs = synthesize_uplink(&scaled, &grid, &pulse).unwrap();
        let rhs = synthesize_uplink(&syms, &grid, &pulse).unwrap();
        for (u, v) in lhs.samples.iter().zip(&rhs.samples) {
            assert!((u - v * a).norm() <= 1e-12 * (1.0 + v.norm()));
        }
        // power-of-two scaling is exact
        let doubled: Vec<Vec<C64>> = syms.iter().map(|u| u.iter().map(|x| x * 2.0).collect()).collect();
        let d = synthesize_uplink(&doubled, &grid, &pulse).unwrap();
        assert!(d.samples.iter().zip(&rhs.samples).all(|(u, v)| *u == v * 2.0));
    }

    #[test]
    fn users_are_frequency_shifted_copies() {
        let grid = PackingGrid::new(1.0, 0.9, 3).unwrap();
        let proto = rrc_pulse(0.2, 16, 8, 1.0).unwrap();
        let pulse = proto.realize(1.0, grid.samples_per_symbol(&proto, 8, 1.05)).unwrap();
        let s = random_symbols(1, 40, 4).remove(0);
        let zero = vec![ZERO; 40];
        let only = |u: usize| {
            let mut v = vec![zero.clone(); 3];
            v[u] = s.clone();
            synthesize_uplink(&v, &grid, &pulse).unwrap()
        };
        let center = only(1);
        let upper = only(2);
        let shifted = center.frequency_shift(grid.spacing());
        for (u, v) in upper.samples.iter().zip(&shifted.samples) {
            assert!((u - v).norm() < 1e-6);
        }
    }

    #[test]
    fn insufficient_rate_is_rejected() {
        let grid = PackingGrid::new(1.0, 1.0, 5).unwrap();
        let pulse = rrc_pulse(0.2, 16, 4, 1.0).unwrap();
        let r = synthesize_uplink(&random_symbols(5, 10, 5), &grid, &pulse);
        assert!(matches!(r, Err(Error::SampleRateInsufficient { .. })));
    }
}
