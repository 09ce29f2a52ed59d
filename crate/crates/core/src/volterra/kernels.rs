use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{apply_transponder, TransponderSpec};
use crate::dsp::{convolve, C64, ZERO};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::waveform::{shape_symbols, Constellation, ConstellationLabel, PulseShape};

/// Default kernel support in symbol intervals.
pub const SUPPORT_SYMBOLS: usize = 16;

/// Condition-number ceiling for the per-phase normal equations.
pub const CONDITION_CAP: f64 = 1e12;

/// Number of kernels `N_V = (v + 1) / 2` of an odd Volterra order `v <= 7`.
pub fn num_kernels(order: usize) -> Result<usize> {
    if order.is_multiple_of(2) || order > 7 {
        return Err(Error::param("v", format!("Volterra order {order} must be odd and at most 7")));
    }
    Ok(order.div_ceil(2))
}

/// Identification context stored with a kernel set so it can be cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub label: ConstellationLabel,
    pub tau: f64,
    pub bandwidth_scale: f64,
    pub spec_hash: String,
    pub probe_len: usize,
}

/// Kernels `h^{(2i+1)}` of the simplified Volterra model
/// `r(t) = sum_k sum_i x_k |x_k|^{2i} h^{(2i+1)}(t - kT)`, sampled on
/// `[-half_len, half_len]` around each symbol instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraKernelSet {
    pub order: usize,
    pub kernels: Vec<Vec<C64>>,
    pub half_len: usize,
    pub samples_per_symbol: usize,
    pub sample_interval: f64,
    /// Kernels actually fitted; the rest are zero because the probe
    /// constellation cannot tell them apart.
    pub fitted: usize,
    /// `||r - r_hat||^2 / ||r||^2` on the probe.
    pub residual: f64,
    pub meta: KernelMeta,
}

impl VolterraKernelSet {
    pub fn num_kernels(&self) -> usize {
        self.kernels.len()
    }

    pub fn len(&self) -> usize {
        2 * self.half_len + 1
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// `h_bar = sum_i h^{(2i+1)}`, the single pulse seen by PSK symbols.
    pub fn combined(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.len()];
        for k in &self.kernels {
            out.iter_mut().zip(k).for_each(|(o, h)| *o += h);
        }
        out
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.kernels[i].iter().map(|h| h.norm_sqr()).sum::<f64>() * self.sample_interval
    }

    /// Energy of the first kernel over the total.
    pub fn dominance(&self) -> f64 {
        let total: f64 = (0..self.num_kernels()).map(|i| self.energy(i)).sum();
        self.energy(0) / total
    }

    /// Front-end pulses: `h_bar` alone for PSK, the fitted kernels otherwise.
    pub fn front_end(&self, psk: bool) -> Vec<Vec<C64>> {
        if psk {
            vec![self.combined()]
        } else {
            self.kernels[..self.fitted].to_vec()
        }
    }

    /// Model output for symbols `x` (useful for residual checks).
    pub fn reconstruct(&self, x: &[C64], out_len: usize, origin: usize) -> Vec<C64> {
        let mut r = vec![ZERO; out_len];
        let h = self.half_len as isize;
        for (k, &xk) in x.iter().enumerate() {
            let a2 = xk.norm_sqr();
            let center = origin as isize + (k * self.samples_per_symbol) as isize;
            for (i, kern) in self.kernels.iter().enumerate() {
                let s = xk * a2.powi(i as i32);
                for (d, &hv) in kern.iter().enumerate() {
                    let m = center + d as isize - h;
                    if m >= 0 && (m as usize) < out_len {
                        r[m as usize] += s * hv;
                    }
                }
            }
        }
        r
    }
}

/// Minimum probe length (symbols): 100 observations per unknown of the
/// largest per-phase least-squares problem.
pub fn min_probe_len(fitted: usize, support_symbols: usize) -> usize {
    100 * fitted * (support_symbols + 1)
}

/// Fit the kernels of order `v` by least squares on a random probe pushed
/// through the single-carrier chain `spec`.
///
/// The fit is polyphase: output samples sharing a phase within the symbol
/// interval depend on disjoint kernel taps, so each phase is an independent
/// least-squares problem with `fitted * (support + 1)` unknowns at most.
/// Only `min(N_V, rings)` kernels are identifiable from a constellation with
/// that many distinct amplitudes; the remaining kernels are returned as zero.
pub fn identify_kernels(
    spec: &TransponderSpec,
    pulse: &PulseShape,
    constellation: &Constellation,
    order: usize,
    probe_len: usize,
    rng: &mut Rng,
) -> Result<VolterraKernelSet> {
    identify_with_support(spec, pulse, constellation, order, probe_len, SUPPORT_SYMBOLS, rng)
}

pub fn identify_with_support(
    spec: &TransponderSpec,
    pulse: &PulseShape,
    constellation: &Constellation,
    order: usize,
    probe_len: usize,
    support_symbols: usize,
    rng: &mut Rng,
) -> Result<VolterraKernelSet> {
    let nv = num_kernels(order)?;
    let fitted = nv.min(constellation.num_rings());
    let needed = min_probe_len(fitted, support_symbols);
    if probe_len < needed {
        return Err(Error::ProbeTooShort { len: probe_len, needed });
    }
    let sps = pulse.samples_per_symbol;
    let half = support_symbols * sps / 2;
    let indices = constellation.random_indices(rng, probe_len);
    let x = constellation.map(&indices);
    let out = apply_transponder(&shape_symbols(&x, pulse, 1.0), spec)?;
    let origin = out.origin as isize;
    let feats: Vec<Vec<C64>> = x
        .iter()
        .map(|&v| (0..fitted).map(|i| v * v.norm_sqr().powi(i as i32)).collect())
        .collect();

    let mut kernels = vec![vec![ZERO; 2 * half + 1]; nv];
    let mut err_power = 0.0;
    let mut sig_power = 0.0;
    let u_lo = half as isize;
    let u_hi = ((probe_len - 1) * sps) as isize - half as isize;
    for rho in 0..sps {
        let taps: Vec<isize> = (-(half as isize)..=half as isize)
            .filter(|d| d.rem_euclid(sps as isize) == rho as isize)
            .collect();
        let n = fitted * taps.len();
        let mut ata = DMatrix::<C64>::zeros(n, n);
        let mut atb = DVector::<C64>::zeros(n);
        let mut row = vec![ZERO; n];
        let mut rows = Vec::new();
        let mut u = u_lo + (rho as isize - u_lo).rem_euclid(sps as isize);
        while u <= u_hi {
            for (j, &d) in taps.iter().enumerate() {
                let k = ((u - d) / sps as isize) as usize;
                for i in 0..fitted {
                    row[i * taps.len() + j] = feats[k][i];
                }
            }
            let r = out.samples[(origin + u) as usize];
            for a in 0..n {
                let ca = row[a].conj();
                atb[a] += ca * r;
                for b in a..n {
                    ata[(a, b)] += ca * row[b];
                }
            }
            rows.push(u);
            u += sps as isize;
        }
        for a in 0..n {
            for b in 0..a {
                ata[(a, b)] = ata[(b, a)].conj();
            }
        }
        let eig = ata.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > CONDITION_CAP {
            return Err(Error::IllConditioned { condition });
        }
        let sol = ata
            .cholesky()
            .ok_or(Error::IllConditioned { condition })?
            .solve(&atb);
        for (j, &d) in taps.iter().enumerate() {
            for i in 0..fitted {
                kernels[i][(d + half as isize) as usize] = sol[i * taps.len() + j];
            }
        }
        for &u in &rows {
            let mut fit = ZERO;
            for (j, &d) in taps.iter().enumerate() {
                let k = ((u - d) / sps as isize) as usize;
                for i in 0..fitted {
                    fit += feats[k][i] * sol[i * taps.len() + j];
                }
            }
            let r = out.samples[(origin + u) as usize];
            err_power += (r - fit).norm_sqr();
            sig_power += r.norm_sqr();
        }
    }
    let spec_hash = crate::seed::config_hash(&serde_json::to_string(spec)?);
    Ok(VolterraKernelSet {
        order,
        kernels,
        half_len: half,
        samples_per_symbol: sps,
        sample_interval: pulse.sample_interval,
        fitted,
        residual: err_power / sig_power,
        meta: KernelMeta {
            label: constellation.label,
            tau: pulse.sample_interval * sps as f64,
            bandwidth_scale: pulse.bandwidth_scale,
            spec_hash,
            probe_len,
        },
    })
}

/// Pulse convolved with the IMUX and OMUX taps (the linear-chain kernel).
pub fn linear_cascade(spec: &TransponderSpec, pulse: &PulseShape) -> Vec<C64> {
    let p = pulse.complex_taps();
    let a = convolve(&p, &spec.imux.taps);
    let mut h = convolve(&a, &spec.omux.taps);
    let g = spec.input_gain();
    h.iter_mut().for_each(|v| *v *= g);
    h
}
