use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kernels::VolterraKernelSet;
use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};
use crate::waveform::{Constellation, SampleBuffer};

/// Lags beyond the memory are below this fraction of lag 0.
pub const MEMORY_THRESHOLD: f64 = 1e-4;

/// Matched-filter statistics, `dim` values per symbol epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatBlock {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl StatBlock {
    pub fn zeros(dim: usize, len: usize) -> Self {
        StatBlock {
            dim,
            data: vec![ZERO; dim * len],
        }
    }

    pub fn from_scalars(values: Vec<C64>) -> Self {
        StatBlock { dim: 1, data: values }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, k: usize) -> &[C64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// `self + a * other`, element-wise.
    pub fn add_scaled(&self, other: &StatBlock, a: f64) -> StatBlock {
        StatBlock {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x + y * a).collect(),
        }
    }
}

/// Lags `g_0 ..= g_L` of the (block) Gram sequence; `g_{-l} = g_l^H`.
///
/// Each lag is a `dim x dim` matrix stored row-major, with
/// `[g_l]_{ij} = \int h_j(t) h_i^*(t - lT) dt`. `feature_cov` is the
/// covariance `E[s s^H]` of the per-symbol feature vector
/// `s = (x, x|x|^2, ...)` under i.u.d. inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSequence {
    pub dim: usize,
    pub lags: Vec<Vec<C64>>,
    pub memory: usize,
    pub feature_cov: Vec<C64>,
}

impl GramSequence {
    /// Scalar sequence from `g_0 ..= g_L` with unit feature covariance.
    pub fn scalar(lags: &[C64]) -> Self {
        let lags: Vec<Vec<C64>> = lags.iter().map(|&g| vec![g]).collect();
        let memory = effective_memory(&lags);
        GramSequence {
            dim: 1,
            lags,
            memory,
            feature_cov: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    /// `g_l` for any integer lag (zero outside the stored range).
    pub fn block(&self, l: isize) -> DMatrix<C64> {
        let d = self.dim;
        let a = l.unsigned_abs();
        if a >= self.lags.len() {
            return DMatrix::zeros(d, d);
        }
        let m = DMatrix::from_row_slice(d, d, &self.lags[a]);
        if l >= 0 {
            m
        } else {
            m.adjoint()
        }
    }

    pub fn feature_cov_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.feature_cov)
    }

    /// Block Toeplitz section `[G]_{k,m} = g_{k-m}` over `n` epochs.
    pub fn toeplitz(&self, n: usize) -> DMatrix<C64> {
        let d = self.dim;
        let mut t = DMatrix::zeros(n * d, n * d);
        for k in 0..n {
            for m in 0..n {
                let b = self.block(k as isize - m as isize);
                t.view_mut((k * d, m * d), (d, d)).copy_from(&b);
            }
        }
        t
    }

    /// Same sequence truncated to `memory` lags.
    pub fn truncated(&self) -> GramSequence {
        GramSequence {
            lags: self.lags[..=self.memory].to_vec(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, a: f64) -> GramSequence {
        GramSequence {
            lags: self
                .lags
                .iter()
                .map(|l| l.iter().map(|v| v * a).collect())
                .collect(),
            ..self.clone()
        }
    }
}

fn frob(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn effective_memory(lags: &[Vec<C64>]) -> usize {
    let g0 = frob(&lags[0]);
    (0..lags.len())
        .rev()
        .find(|&l| frob(&lags[l]) >= MEMORY_THRESHOLD * g0)
        .unwrap_or(0)
}

/// Per-symbol feature covariance `E[s s^H]` over the constellation.
pub fn feature_covariance(constellation: &Constellation, dim: usize) -> Vec<C64> {
    let mut r = vec![ZERO; dim * dim];
    for p in 0..constellation.order() {
        let s = constellation.features(p, dim);
        for i in 0..dim {
            for j in 0..dim {
                r[i * dim + j] += s[i] * s[j].conj();
            }
        }
    }
    r.iter_mut().for_each(|v| *v /= constellation.order() as f64);
    r
}

fn pulse_gram(pulses: &[Vec<C64>], sps: usize, dt: f64) -> Vec<Vec<C64>> {
    let d = pulses.len();
    let len = pulses[0].len();
    let max_lag = (len - 1) / sps;
    (0..=max_lag)
        .map(|l| {
            let shift = l * sps;
            let mut blk = vec![ZERO; d * d];
            for i in 0..d {
                for j in 0..d {
                    let s: C64 = (shift..len).map(|m| pulses[j][m] * pulses[i][m - shift].conj()).sum();
                    blk[i * d + j] = s * dt;
                }
            }
            blk
        })
        .collect()
}

/// Gram sequence of the matched-filter front end for `constellation`.
pub fn gram_from_kernels(kernels: &VolterraKernelSet, constellation: &Constellation) -> GramSequence {
    let pulses = kernels.front_end(constellation.is_psk());
    let dt = kernels.sample_interval;
    let lags = pulse_gram(&pulses, kernels.samples_per_symbol, dt);
    let dim = pulses.len();
    let memory = effective_memory(&lags);
    GramSequence {
        dim,
        lags,
        memory,
        feature_cov: feature_covariance(constellation, dim),
    }
}

/// Gram sequence of a single real or complex pulse at `sps` samples per symbol.
pub fn gram_from_pulse(pulse: &[C64], sps: usize, dt: f64) -> GramSequence {
    let lags = pulse_gram(&[pulse.to_vec()], sps, dt);
    let memory = effective_memory(&lags);
    GramSequence {
        dim: 1,
        lags,
        memory,
        feature_cov: vec![C64::new(1.0, 0.0)],
    }
}

/// Correlate `rx` with each of `pulses` (centered, odd length) at the first
/// `count` symbol instants.
pub fn correlate_bank(rx: &SampleBuffer, pulses: &[Vec<C64>], count: usize) -> StatBlock {
    let dim = pulses.len();
    let half = (pulses[0].len() / 2) as isize;
    let dt = 1.0 / rx.sample_rate;
    let mut out = StatBlock::zeros(dim, count);
    for k in 0..count {
        let start = rx.symbol_index(k) as isize - half;
        let lo = (-start).max(0) as usize;
        let hi = ((rx.len() as isize - start).max(0) as usize).min(pulses[0].len());
        let slot = out.at_mut(k);
        for (i, p) in pulses.iter().enumerate() {
            let mut acc = ZERO;
            for j in lo..hi {
                acc += rx.samples[(start + j as isize) as usize] * p[j].conj();
            }
            slot[i] = acc * dt;
        }
    }
    out
}

/// T-spaced outputs of the filters matched to the kernel front end:
/// `h_bar` for PSK, one filter per fitted kernel for APSK.
pub fn matched_filter_bank(
    rx: &SampleBuffer,
    kernels: &VolterraKernelSet,
    constellation: &Constellation,
    count: usize,
) -> Result<StatBlock> {
    if rx.samples_per_symbol != kernels.samples_per_symbol {
        return Err(Error::TimingMismatch(format!(
            "receiver has {} samples per symbol, kernels {}",
            rx.samples_per_symbol, kernels.samples_per_symbol
        )));
    }
    let dt_rx = 1.0 / rx.sample_rate;
    if (dt_rx / kernels.sample_interval - 1.0).abs() * kernels.samples_per_symbol as f64 > 0.5 {
        return Err(Error::TimingMismatch(format!(
            "sample interval {dt_rx} differs from the kernels' {}",
            kernels.sample_interval
        )));
    }
    Ok(correlate_bank(rx, &kernels.front_end(constellation.is_psk()), count))
}
