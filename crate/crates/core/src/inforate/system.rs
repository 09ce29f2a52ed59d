use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, apply_transponder, mux_downlink, TransponderConfig, TransponderSpec};
use crate::dsp::{convolve, C64, ZERO};
use crate::error::{Error, Result};
use crate::predistort::{apply_predistortion, PredistorterLut};
use crate::seed::Rng;
use crate::volterra::{correlate_bank, StatBlock, VolterraKernelSet};
use crate::waveform::{
    build_constellation, rrc_pulse, synthesize_uplink, Constellation, ConstellationLabel, PackingGrid, PulseShape,
    SampleBuffer, DVBS2_FB_TB,
};

/// Everything needed to simulate one operating point of the packed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub constellation: ConstellationLabel,
    pub ring_ratios: Option<Vec<f64>>,
    /// RRC roll-off.
    pub alpha: f64,
    pub span_symbols: usize,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub num_users: usize,
    pub t_b: f64,
    pub f_b: f64,
    /// Minimum samples per `T_B`.
    pub oversampling: usize,
    /// Sample rate margin over the occupied bandwidth.
    pub guard: f64,
    pub transponder: TransponderConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            constellation: ConstellationLabel::Qpsk,
            ring_ratios: None,
            alpha: 0.2,
            span_symbols: 16,
            tau: 1.0,
            nu: 1.0,
            w_scale: 1.0,
            num_users: 5,
            t_b: 1.0,
            f_b: DVBS2_FB_TB,
            oversampling: 8,
            guard: 1.05,
            transponder: TransponderConfig::default(),
        }
    }
}

impl SystemConfig {
    /// Single carrier, flat filters, bypassed HPA.
    pub fn linear(constellation: ConstellationLabel) -> Self {
        SystemConfig {
            constellation,
            num_users: 1,
            transponder: TransponderConfig::linear(),
            ..Default::default()
        }
    }

    pub fn at(&self, tau: f64, nu: f64, w_scale: f64) -> Self {
        SystemConfig {
            tau,
            nu,
            w_scale,
            ..self.clone()
        }
    }

    pub fn with_backoff(&self, input_backoff_db: f64) -> Self {
        let mut c = self.clone();
        c.transponder.input_backoff_db = input_backoff_db;
        c
    }

    pub fn build(&self) -> Result<System> {
        System::new(self.clone())
    }
}

/// A realized [`SystemConfig`].
#[derive(Debug, Clone)]
pub struct System {
    pub config: SystemConfig,
    pub grid: PackingGrid,
    pub constellation: Constellation,
    /// Pulse sampled for the transmitted symbol period.
    pub pulse: PulseShape,
    pub spec: TransponderSpec,
    pub sample_rate: f64,
}

/// Mean power at the IMUX output of a single carrier carrying i.u.d.
/// unit-energy symbols.
pub fn nominal_imux_power(pulse: &PulseShape, imux: &[C64], symbol_period: f64) -> f64 {
    let h = convolve(&pulse.complex_taps(), imux);
    h.iter().map(|v| v.norm_sqr()).sum::<f64>() * pulse.sample_interval / symbol_period
}

impl System {
    pub fn new(config: SystemConfig) -> Result<Self> {
        Self::sampled(config, None)
    }

    fn sampled(config: SystemConfig, sps: Option<usize>) -> Result<Self> {
        let grid = PackingGrid {
            tau: config.tau,
            nu: config.nu,
            t_b: config.t_b,
            f_b: config.f_b,
            num_users: config.num_users,
            block_len: 1,
        };
        grid.validate()?;
        if !(config.guard >= 1.0) || config.oversampling == 0 {
            return Err(Error::param("guard/oversampling", "guard must be >= 1 and oversampling positive"));
        }
        let constellation = build_constellation(config.constellation, config.ring_ratios.as_deref())?;
        let proto = rrc_pulse(config.alpha, config.span_symbols, config.oversampling, config.w_scale)?;
        let sps = sps.unwrap_or_else(|| grid.samples_per_symbol(&proto, config.oversampling, config.guard));
        let pulse = proto.realize(config.tau, sps)?;
        let sample_rate = sps as f64 / grid.symbol_period();
        let imux = config.transponder.imux.build(sample_rate * config.t_b, config.f_b * config.t_b)?;
        let reference = nominal_imux_power(&pulse, &imux.taps, config.tau);
        let spec = config
            .transponder
            .build(sample_rate * config.t_b, config.f_b * config.t_b, reference)?;
        Ok(System {
            config,
            grid,
            constellation,
            pulse,
            spec,
            sample_rate,
        })
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.pulse.samples_per_symbol
    }

    /// Carrier spacing `F`.
    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// Symbols dropped from the rate accounting at each block edge.
    pub fn guard_symbols(&self) -> usize {
        2 * self.config.span_symbols
    }

    /// Same system with one carrier only (for probes and training), kept
    /// at the sample rate of the full system.
    pub fn single_carrier(&self) -> Result<System> {
        System::sampled(
            SystemConfig {
                num_users: 1,
                ..self.config.clone()
            },
            Some(self.samples_per_symbol()),
        )
    }

    /// Downlink for the given per-user symbol indices: uplink synthesis,
    /// one transponder per carrier on the down-converted composite, and
    /// downlink multiplexing. Returns the noiseless received signal and
    /// the post-OMUX output of the central carrier.
    pub fn downlink(&self, indices: &[Vec<usize>], lut: Option<&PredistorterLut>) -> Result<(SampleBuffer, SampleBuffer)> {
        let symbols: Vec<Vec<C64>> = indices
            .iter()
            .map(|ix| match lut {
                Some(l) => apply_predistortion(ix, l),
                None => self.constellation.map(ix),
            })
            .collect();
        let up = synthesize_uplink(&symbols, &self.grid, &self.pulse)?;
        let f = self.spacing();
        let outputs: Vec<SampleBuffer> = self
            .grid
            .user_indices()
            .map(|l| apply_transponder(&up.frequency_shift(-(l as f64) * f), &self.spec))
            .collect::<Result<_>>()?;
        let center = outputs[self.grid.center_user()].clone();
        Ok((mux_downlink(&outputs, f)?, center))
    }
}

/// Receiver front end applied to the central carrier.
#[derive(Debug, Clone)]
pub enum FrontEnd {
    /// Filter matched to the transmit pulse.
    Pulse(PulseShape),
    /// Bank matched to the Volterra kernels (`h_bar` alone for PSK).
    Kernels(Vec<Vec<C64>>),
}

impl FrontEnd {
    pub fn from_kernels(kernels: &VolterraKernelSet, constellation: &Constellation) -> Self {
        FrontEnd::Kernels(kernels.front_end(constellation.is_psk()))
    }

    pub fn dim(&self) -> usize {
        match self {
            FrontEnd::Pulse(_) => 1,
            FrontEnd::Kernels(k) => k.len(),
        }
    }

    pub fn apply(&self, rx: &SampleBuffer, count: usize) -> StatBlock {
        match self {
            FrontEnd::Pulse(p) => correlate_bank(rx, &[p.complex_taps()], count),
            FrontEnd::Kernels(k) => correlate_bank(rx, k, count),
        }
    }
}

/// One simulated block seen by a front end. The statistic at noise level
/// `n0` is `clean + sqrt(n0) * noise`.
#[derive(Debug, Clone)]
pub struct BlockObservation {
    /// Symbol indices of the central user, guards included.
    pub indices: Vec<usize>,
    pub clean: StatBlock,
    pub noise: StatBlock,
    /// Mean power of the central carrier after its OMUX.
    pub carrier_power: f64,
}

impl BlockObservation {
    pub fn at(&self, n0: f64) -> StatBlock {
        if n0 == 0.0 {
            return self.clean.clone();
        }
        self.clean.add_scaled(&self.noise, n0.sqrt())
    }
}

/// Simulate one block of `len` symbols per user and pass the central
/// carrier through `front`.
pub fn simulate_block(
    system: &System,
    front: &FrontEnd,
    lut: Option<&PredistorterLut>,
    len: usize,
    rng: &mut Rng,
) -> Result<BlockObservation> {
    let center = system.constellation.random_indices(rng, len);
    simulate_frame(system, front, lut, &center, rng)
}

/// Like [`simulate_block`] with prescribed symbols on the central carrier;
/// the interfering carriers draw fresh random symbols.
pub fn simulate_frame(
    system: &System,
    front: &FrontEnd,
    lut: Option<&PredistorterLut>,
    center: &[usize],
    rng: &mut Rng,
) -> Result<BlockObservation> {
    let len = center.len();
    let c = system.grid.center_user();
    let indices: Vec<Vec<usize>> = (0..system.grid.num_users)
        .map(|u| {
            if u == c {
                center.to_vec()
            } else {
                system.constellation.random_indices(rng, len)
            }
        })
        .collect();
    let (rx, carrier) = system.downlink(&indices, lut)?;
    let noise = add_awgn(&rx.with_samples(vec![ZERO; rx.len()]), 1.0, rng)?;
    Ok(BlockObservation {
        indices: center.to_vec(),
        clean: front.apply(&rx, len),
        noise: front.apply(&noise, len),
        carrier_power: carrier.mean_power(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn reference_power_sets_the_drive() {
        let sys = SystemConfig::default().build().unwrap();
        let one = sys.single_carrier().unwrap();
        let x = one.constellation.random_indices(&mut seed::stream(1, &[]), 4000);
        let up = synthesize_uplink(&[one.constellation.map(&x)], &one.grid, &one.pulse).unwrap();
        let imux_out = one.spec.imux.apply(&up.samples);
        let lo = up.origin + 200 * one.samples_per_symbol();
        let hi = up.origin + 3800 * one.samples_per_symbol();
        let p = crate::dsp::mean_power(&imux_out[lo..hi]);
        assert!((p / one.spec.reference_power - 1.0).abs() < 0.05, "{p} vs {}", one.spec.reference_power);
    }

    #[test]
    fn linear_orthogonal_block_is_noiseless_symbols() {
        let err = |span: usize| {
            let sys = SystemConfig {
                span_symbols: span,
                ..SystemConfig::linear(ConstellationLabel::Qpsk)
            }
            .build()
            .unwrap();
            let front = FrontEnd::Pulse(sys.pulse.clone());
            let obs = simulate_block(&sys, &front, None, 200, &mut seed::stream(2, &[])).unwrap();
            let x = sys.constellation.map(&obs.indices);
            (40..160).map(|k| (obs.clean.at(k)[0] - x[k]).norm()).fold(0.0, f64::max)
        };
        let (short, long) = (err(16), err(64));
        assert!(short < 0.05, "{short}");
        assert!(long < short / 2.0 && long < 1e-2, "{long} vs {short}");
    }
}
