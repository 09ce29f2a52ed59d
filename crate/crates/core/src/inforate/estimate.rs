use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::system::{simulate_block, BlockObservation, FrontEnd, System};
use crate::channel::n0_for_snr;
use crate::detect::{bcjr_with, channel_shortening_optimize, memoryless_detect, AuxChannelSpec, BcjrOptions};
use crate::dsp::{db10, golden_max, C64, ZERO};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::predistort::{train_predistorter, PredistorterLut, TrainOptions};
use crate::seed;
use crate::volterra::{gram_from_kernels, identify_kernels, min_probe_len, GramSequence, VolterraKernelSet, SUPPORT_SYMBOLS};

/// Data predistortion at the transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredistortionConfig {
    pub lp: usize,
    #[serde(default)]
    pub train: TrainOptions,
}

/// Receiver family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    /// Pulse-matched filter and the memoryless law `y = c x + n`.
    Memoryless {
        #[serde(default)]
        predistortion: Option<PredistortionConfig>,
        /// Extra noise `N_I`; optimized per SNR when absent.
        #[serde(default)]
        n_i: Option<f64>,
    },
    /// Volterra front end, channel shortening and BCJR.
    Shortened {
        #[serde(default = "default_order")]
        volterra_order: usize,
        #[serde(default = "default_memory")]
        memory: usize,
        #[serde(default)]
        probe_len: Option<usize>,
        /// Extra design noise; optimized per SNR when absent.
        #[serde(default)]
        n_i: Option<f64>,
    },
}

fn default_order() -> usize {
    5
}

fn default_memory() -> usize {
    1
}

impl DetectorConfig {
    pub fn memoryless() -> Self {
        DetectorConfig::Memoryless {
            predistortion: None,
            n_i: None,
        }
    }

    pub fn shortened(memory: usize) -> Self {
        DetectorConfig::Shortened {
            volterra_order: default_order(),
            memory,
            probe_len: None,
            n_i: None,
        }
    }

    pub fn predistortion_lp(&self) -> Option<usize> {
        match self {
            DetectorConfig::Memoryless {
                predistortion: Some(p), ..
            } => Some(p.lp),
            _ => None,
        }
    }
}

/// Monte Carlo settings for rate estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrOptions {
    pub blocks: usize,
    /// Symbols per block counted in the rate (guards excluded).
    pub block_len: usize,
    /// Separate blocks used to fit the memoryless gain and to choose `N_I`.
    pub training_blocks: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for IrOptions {
    fn default() -> Self {
        IrOptions {
            blocks: 20,
            block_len: 500,
            training_blocks: 4,
            seed: 1,
            exec: Exec::default(),
        }
    }
}

/// Least number of blocks behind a confidence interval.
pub const MIN_BLOCKS: usize = 20;

/// Mismatched information rate in bits per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrEstimate {
    /// Estimate clipped to `[0, log2 M]`.
    pub bits_per_channel_use: f64,
    /// Unclipped block average.
    pub raw_bits: f64,
    pub half_width_95: f64,
    pub k_used: usize,
    pub blocks: usize,
    pub config_hash: String,
}

impl IrEstimate {
    pub fn from_blocks(values: &[f64], k_per_block: usize, bits_max: f64, config_hash: String) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        IrEstimate {
            bits_per_channel_use: mean.clamp(0.0, bits_max),
            raw_bits: mean,
            half_width_95: 1.96 * (var / n).sqrt(),
            k_used: values.len() * k_per_block,
            blocks: values.len(),
            config_hash,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ReceiverModel {
    Memoryless {
        /// Least-squares gain from symbols to statistics.
        gain: C64,
    },
    Shortened {
        kernels: VolterraKernelSet,
        gram: GramSequence,
        memory: usize,
    },
}

/// Front end, optional predistorter and the statistics the detector is
/// designed from.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub front: FrontEnd,
    pub lut: Option<PredistorterLut>,
    pub model: ReceiverModel,
    /// Noiseless blocks the extra noise `N_I` is tuned on.
    pub training: Vec<BlockObservation>,
    /// Per-dimension power of the model residual on `training`.
    pub distortion: f64,
    pub n_i: Option<f64>,
}

/// Train the predistorter of `cfg` on the single-carrier chain of `system`.
pub fn train_for(system: &System, cfg: &PredistortionConfig) -> Result<PredistorterLut> {
    let one = system.single_carrier()?;
    let (lut, report) = train_predistorter(&one.spec, &one.pulse, &one.constellation, cfg.lp, &cfg.train)?;
    log::info!(
        "predistorter L_p={} trained in {} iterations (converged: {})",
        cfg.lp,
        report.iterations,
        report.converged
    );
    Ok(lut)
}

/// Design the receiver of `det` for `system`. A pre-trained `lut` skips
/// predistorter training.
pub fn prepare_receiver(
    system: &System,
    det: &DetectorConfig,
    lut: Option<PredistorterLut>,
    opts: &IrOptions,
) -> Result<Receiver> {
    let n_i = match det {
        DetectorConfig::Memoryless { n_i, .. } | DetectorConfig::Shortened { n_i, .. } => *n_i,
    };
    if n_i.is_some_and(|v| !(v >= 0.0)) {
        return Err(Error::param("n_i", "must be non-negative"));
    }
    let (front, lut, model) = match det {
        DetectorConfig::Memoryless { predistortion, .. } => {
            let lut = match (lut, predistortion) {
                (Some(l), _) => Some(l),
                (None, Some(cfg)) => Some(train_for(system, cfg)?),
                (None, None) => None,
            };
            (FrontEnd::Pulse(system.pulse.clone()), lut, None)
        }
        DetectorConfig::Shortened {
            volterra_order,
            memory,
            probe_len,
            ..
        } => {
            let one = system.single_carrier()?;
            let fitted = volterra_order.div_ceil(2).min(system.constellation.num_rings());
            let probe = probe_len.unwrap_or_else(|| min_probe_len(fitted, SUPPORT_SYMBOLS));
            let kernels = identify_kernels(
                &one.spec,
                &one.pulse,
                &one.constellation,
                *volterra_order,
                probe,
                &mut seed::stream(opts.seed, &[0x766f]),
            )?;
            let gram = gram_from_kernels(&kernels, &system.constellation);
            let front = FrontEnd::from_kernels(&kernels, &system.constellation);
            let model = ReceiverModel::Shortened {
                kernels,
                gram,
                memory: *memory,
            };
            (front, None, Some(model))
        }
    };
    let guard = system.guard_symbols();
    let len = opts.block_len + 2 * guard;
    let training = opts.exec.try_map_range(opts.training_blocks.max(1), |b| {
        simulate_block(
            system,
            &front,
            lut.as_ref(),
            len,
            &mut seed::stream(opts.seed, &[0x7261, b as u64]),
        )
    })?;
    let model = match model {
        Some(m) => m,
        None => {
            let (mut cross, mut power) = (ZERO, 0.0);
            for obs in &training {
                let x = system.constellation.map(&obs.indices);
                for k in guard..len - guard {
                    cross += x[k].conj() * obs.clean.at(k)[0];
                    power += x[k].norm_sqr();
                }
            }
            ReceiverModel::Memoryless { gain: cross / power }
        }
    };
    let distortion = model_distortion(system, &model, &training);
    Ok(Receiver {
        front,
        lut,
        model,
        training,
        distortion,
        n_i,
    })
}

/// Mean squared mismatch between noiseless statistics and the model
/// prediction, per real dimension and normalized to the noise gain.
fn model_distortion(system: &System, model: &ReceiverModel, training: &[BlockObservation]) -> f64 {
    let guard = system.guard_symbols();
    let c = &system.constellation;
    let (mut err, mut count) = (0.0, 0usize);
    match model {
        ReceiverModel::Memoryless { gain } => {
            for obs in training {
                let x = c.map(&obs.indices);
                for k in guard..obs.indices.len() - guard {
                    err += (obs.clean.at(k)[0] - gain * x[k]).norm_sqr();
                    count += 1;
                }
            }
            err / (2.0 * count as f64)
        }
        ReceiverModel::Shortened { gram, .. } => {
            let d = gram.dim;
            let reach = gram.max_lag() as isize;
            let blocks: Vec<_> = (-reach..=reach).map(|l| gram.block(l)).collect();
            for obs in training {
                let feats: Vec<Vec<C64>> = obs.indices.iter().map(|&i| c.features(i, d)).collect();
                let n = obs.indices.len() as isize;
                for k in guard as isize..n - guard as isize {
                    let mut pred = vec![ZERO; d];
                    for (j, g) in blocks.iter().enumerate() {
                        let m = k - (j as isize - reach);
                        if m < 0 || m >= n {
                            continue;
                        }
                        let s = &feats[m as usize];
                        for r in 0..d {
                            for q in 0..d {
                                pred[r] += g[(r, q)] * s[q];
                            }
                        }
                    }
                    let y = obs.clean.at(k as usize);
                    err += (0..d).map(|r| (y[r] - pred[r]).norm_sqr()).sum::<f64>();
                    count += 1;
                }
            }
            let g0: f64 = (0..d).map(|r| gram.lags[0][r * d + r].re).sum();
            err / (2.0 * count as f64 * g0)
        }
    }
}

fn delta_priors(indices: &[usize], guard: usize, m: usize) -> Vec<Vec<f64>> {
    let k_len = indices.len();
    (0..k_len)
        .map(|k| {
            if k < guard || k >= k_len - guard {
                let mut row = vec![0.0; m];
                row[indices[k]] = 1.0;
                row
            } else {
                vec![1.0 / m as f64; m]
            }
        })
        .collect()
}

/// Rate (bits per counted symbol) of one observed block at noise `n0`.
pub fn block_rate(system: &System, aux: &AuxChannelSpec, obs: &BlockObservation, n0: f64) -> Result<f64> {
    let guard = system.guard_symbols();
    let m = system.constellation.order();
    let k_used = obs.indices.len() - 2 * guard;
    let priors = delta_priors(&obs.indices, guard, m);
    let y = obs.at(n0);
    let out = match aux {
        AuxChannelSpec::Memoryless { gain, n0: n_design, n_i } => {
            let ys: Vec<C64> = y.data.clone();
            memoryless_detect(&ys, &system.constellation, *gain, n_design + n_i, Some(&priors), Some(&obs.indices))?
        }
        AuxChannelSpec::Ungerboeck(u) => bcjr_with(
            &y,
            u,
            &system.constellation,
            Some(&priors),
            Some(&obs.indices),
            BcjrOptions {
                posteriors: false,
                ..Default::default()
            },
        )?,
    };
    let log_pyx = out.log_pyx.expect("truth supplied");
    Ok((log_pyx - out.log_py) / (k_used as f64 * LN_2))
}

/// Rate estimate over a set of observed blocks.
pub fn rate_over(
    system: &System,
    aux: &AuxChannelSpec,
    blocks: &[BlockObservation],
    n0: f64,
    exec: Exec,
    config_hash: &str,
) -> Result<IrEstimate> {
    let values = exec.try_map_range(blocks.len(), |b| {
        block_rate(system, aux, &blocks[b], n0).map_err(|e| match e {
            Error::NonFiniteLikelihood { .. } => Error::NonFiniteLikelihood { block: b },
            other => other,
        })
    })?;
    let k = blocks[0].indices.len() - 2 * system.guard_symbols();
    Ok(IrEstimate::from_blocks(
        &values,
        k,
        system.constellation.bits_per_symbol() as f64,
        config_hash.to_string(),
    ))
}

impl Receiver {
    /// Auxiliary law at noise level `n0` with extra design noise `n_i`.
    pub fn aux_with(&self, n0: f64, n_i: f64) -> Result<AuxChannelSpec> {
        match &self.model {
            ReceiverModel::Memoryless { gain } => AuxChannelSpec::memoryless(*gain, n0, n_i),
            ReceiverModel::Shortened { gram, memory, .. } => Ok(AuxChannelSpec::Ungerboeck(
                channel_shortening_optimize(gram, n0 + n_i, *memory)?,
            )),
        }
    }

    /// Auxiliary law at noise level `n0`, choosing `N_I` by golden-section
    /// search on a log scale over the training blocks when it is free.
    pub fn aux_for(&self, system: &System, n0: f64) -> Result<(AuxChannelSpec, f64)> {
        if let Some(v) = self.n_i {
            return Ok((self.aux_with(n0, v)?, v));
        }
        let score = |n_i: f64| -> f64 {
            let Ok(aux) = self.aux_with(n0, n_i) else {
                return f64::NEG_INFINITY;
            };
            let mut total = 0.0;
            for obs in &self.training {
                match block_rate(system, &aux, obs, n0) {
                    Ok(v) => total += v,
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
            total / self.training.len() as f64
        };
        let floor = if n0 > 0.0 {
            0.0
        } else {
            (self.distortion * 1e-6).max(1e-12)
        };
        let mut best = (floor, score(floor));
        if self.distortion > 0.0 {
            let centre = self.distortion.log10();
            let (x, v) = golden_max(|e| score(10f64.powf(e)), centre - 3.0, centre + 1.0, 14);
            if v > best.1 {
                best = (10f64.powf(x), v);
            }
        }
        Ok((self.aux_with(n0, best.0)?, best.0))
    }
}

/// One SNR point of an operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub n0: f64,
    pub n_i: f64,
    pub obo_db: f64,
    pub ir: IrEstimate,
}

/// Simulate `opts.blocks` blocks of `system`.
pub fn observe(system: &System, receiver: &Receiver, opts: &IrOptions) -> Result<Vec<BlockObservation>> {
    if opts.blocks < MIN_BLOCKS {
        return Err(Error::param("blocks", format!("need at least {MIN_BLOCKS} blocks for a confidence interval")));
    }
    let len = opts.block_len + 2 * system.guard_symbols();
    opts.exec.try_map_range(opts.blocks, |b| {
        simulate_block(system, &receiver.front, receiver.lut.as_ref(), len, &mut seed::stream(opts.seed, &[b as u64]))
    })
}

/// Rate of `aux` over fresh blocks at noise level `n0`.
pub fn estimate_ir(
    system: &System,
    receiver: &Receiver,
    aux: &AuxChannelSpec,
    n0: f64,
    opts: &IrOptions,
    config_hash: &str,
) -> Result<IrEstimate> {
    let blocks = observe(system, receiver, opts)?;
    rate_over(system, aux, &blocks, n0, opts.exec, config_hash)
}

/// Rates of one operating point at every SNR in `snr_db`, reusing the
/// same transmitted blocks and noise shapes across SNRs.
pub fn evaluate_point(
    system: &System,
    receiver: &Receiver,
    snr_db: &[f64],
    opts: &IrOptions,
    config_hash: &str,
) -> Result<Vec<RatePoint>> {
    let blocks = observe(system, receiver, opts)?;
    let power = blocks.iter().map(|b| b.carrier_power).sum::<f64>() / blocks.len() as f64;
    let p_sat = system.spec.p_sat();
    let obo_db = if power > 0.0 { db10(p_sat / power) } else { f64::INFINITY };
    snr_db
        .iter()
        .map(|&snr| {
            let n0 = n0_for_snr(p_sat, system.spacing(), snr);
            let (aux, n_i) = receiver.aux_for(system, n0)?;
            let ir = rate_over(system, &aux, &blocks, n0, opts.exec, config_hash)?;
            Ok(RatePoint {
                snr_db: snr,
                n0,
                n_i,
                obo_db,
                ir,
            })
        })
        .collect()
}

/// Design-noise level that puts a unit-energy constellation at `es_n0_db`
/// on a matched filter with unit-energy pulse.
pub fn n0_for_es_n0(es_n0_db: f64) -> f64 {
    0.5 * 10f64.powf(-es_n0_db / 10.0)
}
