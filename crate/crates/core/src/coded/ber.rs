use serde::{Deserialize, Serialize};

use super::ldpc::{LdpcCode, SoftDecoder};
use super::turbo::{run_iterative_receiver, BitMapper, Guards};
use super::{IterationSchedule, ModCod};
use crate::channel::n0_for_snr;
use crate::detect::AuxChannelSpec;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::inforate::{prepare_receiver, simulate_frame, DetectorConfig, IrOptions, Receiver, System, SystemConfig};
use crate::seed;
use rand::Rng as _;

/// Stopping rule of a BER point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerLimits {
    /// Stop once this many codewords were decoded in error.
    pub min_frame_errors: usize,
    pub max_codewords: usize,
    /// Codewords simulated between stopping checks.
    pub batch: usize,
}

impl Default for BerLimits {
    fn default() -> Self {
        BerLimits {
            min_frame_errors: 10,
            max_codewords: 200,
            batch: 8,
        }
    }
}

/// Coded BER sweep of one MODCOD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodedConfig {
    pub code_length: usize,
    pub schedule: IterationSchedule,
    pub detector: DetectorConfig,
    pub input_backoff_db: f64,
    pub snr_db: Vec<f64>,
    pub limits: BerLimits,
    /// Seed of the parity-check matrix and the interleaver.
    pub code_seed: u64,
}

impl Default for CodedConfig {
    fn default() -> Self {
        CodedConfig {
            code_length: 4032,
            schedule: IterationSchedule::default(),
            detector: DetectorConfig::shortened(1),
            input_backoff_db: 3.0,
            snr_db: vec![],
            limits: BerLimits::default(),
            code_seed: 1,
        }
    }
}

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Codewords simulated.
    pub trials: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub frame_errors: usize,
    pub mean_global_iterations: f64,
    pub config_hash: String,
}

/// Wilson score interval for `errors` out of `trials` at 95%.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Everything fixed across the SNR points of a BER curve.
pub struct CodedLink {
    pub system: System,
    pub receiver: Receiver,
    pub code: LdpcCode,
    pub mapper: BitMapper,
    pub schedule: IterationSchedule,
}

impl CodedLink {
    pub fn new(base: &SystemConfig, modcod: &ModCod, cfg: &CodedConfig, opts: &IrOptions) -> Result<Self> {
        modcod.validate()?;
        cfg.schedule.validate()?;
        let system = SystemConfig {
            constellation: modcod.constellation,
            ..base.at(modcod.tau, modcod.nu, modcod.w_scale)
        }
        .with_backoff(cfg.input_backoff_db)
        .build()?;
        let receiver = prepare_receiver(&system, &cfg.detector, None, opts)?;
        let code = LdpcCode::new(cfg.code_length, modcod.rate.value(), cfg.code_seed)?;
        let mapper = BitMapper::new(system.constellation.clone(), cfg.code_length, cfg.code_seed);
        Ok(CodedLink {
            system,
            receiver,
            code,
            mapper,
            schedule: cfg.schedule,
        })
    }

    /// Transmit and decode codeword `index` at noise level `n0`; returns
    /// (bit errors, frame in error, global iterations).
    fn trial(&self, aux: &AuxChannelSpec, n0: f64, seed_value: u64, index: usize) -> Result<(usize, bool, usize)> {
        let mut rng = seed::stream(seed_value, &[0x6265, index as u64]);
        let info: Vec<u8> = (0..self.code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let word = self.code.encode(&info)?;
        let g = self.system.guard_symbols();
        let guards = Guards {
            head: self.system.constellation.random_indices(&mut rng, g),
            tail: self.system.constellation.random_indices(&mut rng, g),
        };
        let frame = guards.frame(&self.mapper.symbols(&word));
        let obs = simulate_frame(&self.system, &self.receiver.front, self.receiver.lut.as_ref(), &frame, &mut rng)?;
        let out = run_iterative_receiver(&obs.at(n0), aux, &self.mapper, &guards, &self.code, self.schedule)?;
        let errors = out.info_bits.iter().zip(&info).filter(|(a, b)| a != b).count();
        Ok((errors, errors > 0 || !out.converged, out.global_iterations))
    }
}

/// Monte Carlo BER at one SNR. Codeword `i` uses the same random stream at
/// every SNR.
pub fn estimate_ber(
    link: &CodedLink,
    snr_db: f64,
    limits: &BerLimits,
    seed_value: u64,
    exec: Exec,
    config_hash: &str,
) -> Result<BerPoint> {
    if limits.batch == 0 || limits.max_codewords == 0 {
        return Err(Error::param("limits", "batch and max_codewords must be positive"));
    }
    let n0 = n0_for_snr(link.system.spec.p_sat(), link.system.spacing(), snr_db);
    let (aux, _) = link.receiver.aux_for(&link.system, n0)?;
    let (mut done, mut bit_errors, mut frame_errors, mut iters) = (0usize, 0usize, 0usize, 0usize);
    while done < limits.max_codewords && frame_errors < limits.min_frame_errors {
        let size = limits.batch.min(limits.max_codewords - done);
        let results = exec.try_map_range(size, |i| link.trial(&aux, n0, seed_value, done + i))?;
        for (e, f, g) in results {
            bit_errors += e;
            frame_errors += usize::from(f);
            iters += g;
        }
        done += size;
    }
    let bits = done * link.code.k();
    let (ci_low, ci_high) = wilson_interval(bit_errors, bits);
    Ok(BerPoint {
        snr_db,
        ber: bit_errors as f64 / bits as f64,
        ci_low,
        ci_high,
        trials: done,
        bits,
        bit_errors,
        frame_errors,
        mean_global_iterations: iters as f64 / done as f64,
        config_hash: config_hash.to_string(),
    })
}

/// BER of `modcod` at every SNR of `cfg`.
pub fn ber_curve(
    base: &SystemConfig,
    modcod: &ModCod,
    cfg: &CodedConfig,
    opts: &IrOptions,
    config_hash: &str,
) -> Result<Vec<BerPoint>> {
    let link = CodedLink::new(base, modcod, cfg, opts)?;
    cfg.snr_db
        .iter()
        .map(|&snr| estimate_ber(&link, snr, &cfg.limits, opts.seed, opts.exec, config_hash))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && hi > 0.05);
        assert!((lo - 0.0381).abs() < 5e-4 && (hi - 0.0653).abs() < 5e-4);
    }
}
