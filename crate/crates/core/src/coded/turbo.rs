use rand::seq::SliceRandom;

use super::ldpc::{SoftDecoder, LLR_CLIP};
use super::IterationSchedule;
use crate::detect::{bcjr_detect, memoryless_detect, AuxChannelSpec};
use crate::dsp::log_sum_exp;
use crate::error::{Error, Result};
use crate::seed;
use crate::volterra::StatBlock;
use crate::waveform::Constellation;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `ln P(b)` for a bit with LLR `l = ln P(0)/P(1)`.
fn log_bit_prob(b: u8, l: f64) -> f64 {
    if b == 0 {
        -softplus(-l)
    } else {
        -softplus(l)
    }
}

/// Interleaving and labelling between codeword bits and symbols. Symbol
/// `k` carries interleaved bits `k m .. k m + m`, most significant first;
/// positions past the codeword are known zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMapper {
    pub constellation: Constellation,
    n: usize,
    /// Interleaved position `i` holds codeword bit `perm[i]`.
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl BitMapper {
    /// Pseudo-random interleaver of length `n` drawn from `seed_value`.
    pub fn new(constellation: Constellation, n: usize, seed_value: u64) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::stream(seed_value, &[0x696c, n as u64]));
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        BitMapper {
            constellation,
            n,
            perm,
            inverse,
        }
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    pub fn num_symbols(&self) -> usize {
        self.n.div_ceil(self.bits_per_symbol())
    }

    pub fn interleaver(&self) -> &[usize] {
        &self.perm
    }

    fn interleaved_bit(&self, values: &[u8], i: usize) -> u8 {
        if i < self.n {
            values[self.perm[i]]
        } else {
            0
        }
    }

    pub fn symbols(&self, codeword: &[u8]) -> Vec<usize> {
        let m = self.bits_per_symbol();
        (0..self.num_symbols())
            .map(|k| {
                let label = (0..m).fold(0u32, |acc, j| (acc << 1) | self.interleaved_bit(codeword, k * m + j) as u32);
                self.constellation.index_of_label(label)
            })
            .collect()
    }

    /// A-priori LLR of every interleaved position, padding included.
    fn interleaved_llrs(&self, codeword_llrs: &[f64]) -> Vec<f64> {
        let total = self.num_symbols() * self.bits_per_symbol();
        (0..total)
            .map(|i| if i < self.n { codeword_llrs[self.perm[i]] } else { LLR_CLIP })
            .collect()
    }

    /// Symbol priors (probability rows) from bit LLRs in codeword order.
    pub fn symbol_priors(&self, codeword_llrs: &[f64]) -> Vec<Vec<f64>> {
        let m = self.bits_per_symbol();
        let q = self.constellation.order();
        let la = self.interleaved_llrs(codeword_llrs);
        (0..self.num_symbols())
            .map(|k| {
                let logs: Vec<f64> = (0..q)
                    .map(|a| (0..m).map(|j| log_bit_prob(self.constellation.bit(a, j), la[k * m + j])).sum())
                    .collect();
                let norm = log_sum_exp(&logs);
                logs.iter().map(|l| (l - norm).exp()).collect()
            })
            .collect()
    }

    /// Extrinsic bit LLRs in codeword order from symbol posteriors and the
    /// bit LLRs that produced the priors. The contribution of bit `j`'s own
    /// prior is removed, so the detector never returns a message to its
    /// producer.
    pub fn extrinsic(&self, posteriors: &[Vec<f64>], codeword_llrs: &[f64]) -> Vec<f64> {
        let m = self.bits_per_symbol();
        let q = self.constellation.order();
        let la = self.interleaved_llrs(codeword_llrs);
        let mut out = vec![0.0; self.n];
        let mut zero = Vec::with_capacity(q);
        let mut onev = Vec::with_capacity(q);
        for (k, post) in posteriors.iter().enumerate() {
            let bit_logs: Vec<Vec<f64>> = (0..q)
                .map(|a| (0..m).map(|j| log_bit_prob(self.constellation.bit(a, j), la[k * m + j])).collect())
                .collect();
            for j in 0..m {
                let i = k * m + j;
                if i >= self.n {
                    continue;
                }
                zero.clear();
                onev.clear();
                for a in 0..q {
                    let v = post[a].ln() - bit_logs[a][j];
                    if self.constellation.bit(a, j) == 0 {
                        zero.push(v);
                    } else {
                        onev.push(v);
                    }
                }
                let (l0, l1) = (log_sum_exp(&zero), log_sum_exp(&onev));
                let e = if l0 == f64::NEG_INFINITY && l1 == f64::NEG_INFINITY {
                    0.0
                } else {
                    (l0 - l1).clamp(-LLR_CLIP, LLR_CLIP)
                };
                out[self.perm[i]] = e;
            }
        }
        out
    }

    /// Codeword position of interleaved position `i`.
    pub fn deinterleave_index(&self, i: usize) -> usize {
        self.perm[i]
    }

    /// Interleaved position of codeword bit `b`.
    pub fn interleave_index(&self, b: usize) -> usize {
        self.inverse[b]
    }
}

/// Known symbols placed before and after the coded symbols.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Guards {
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
}

impl Guards {
    pub fn frame(&self, data: &[usize]) -> Vec<usize> {
        let mut out = self.head.clone();
        out.extend_from_slice(data);
        out.extend_from_slice(&self.tail);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboOutput {
    /// Hard decisions on the information bits.
    pub info_bits: Vec<u8>,
    pub codeword_bits: Vec<u8>,
    /// Every parity check was satisfied before the schedule ran out.
    pub converged: bool,
    pub global_iterations: usize,
    /// Soft-bit information of the decoder posteriors after each global
    /// iteration.
    pub mi_trace: Vec<f64>,
    /// Detector posteriors of the coded symbols in the last pass.
    pub detector_posteriors: Vec<Vec<f64>>,
}

/// Average `1 - E[H_b(1 / (1 + e^{|L|}))]` over a set of LLRs, a
/// truth-free estimate of the information they carry.
pub fn soft_bit_information(llrs: &[f64]) -> f64 {
    if llrs.is_empty() {
        return 0.0;
    }
    let h = |l: f64| {
        let a = l.abs();
        let p = 1.0 / (1.0 + a.exp());
        if p <= 0.0 {
            0.0
        } else {
            -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
        }
    };
    1.0 - llrs.iter().map(|&l| h(l)).sum::<f64>() / llrs.len() as f64
}

fn detect(y: &StatBlock, aux: &AuxChannelSpec, c: &Constellation, priors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let out = match aux {
        AuxChannelSpec::Memoryless { gain, n0, n_i } => {
            if y.dim != 1 {
                return Err(Error::param("y", "memoryless detection needs scalar statistics"));
            }
            memoryless_detect(&y.data, c, *gain, n0 + n_i, Some(priors), None)?
        }
        AuxChannelSpec::Ungerboeck(u) => bcjr_detect(y, u, c, Some(priors), None)?,
    };
    Ok(out.posteriors)
}

/// Turbo loop between the detector of `aux` and `code`: detector
/// extrinsics become decoder inputs, decoder extrinsics become detector
/// priors. Stops once the decoder reports a valid codeword.
pub fn run_iterative_receiver(
    y: &StatBlock,
    aux: &AuxChannelSpec,
    mapper: &BitMapper,
    guards: &Guards,
    code: &dyn SoftDecoder,
    schedule: IterationSchedule,
) -> Result<TurboOutput> {
    schedule.validate()?;
    let n = code.n();
    if mapper.codeword_len() != n {
        return Err(Error::param("mapper", "interleaver length differs from the code length"));
    }
    let ns = mapper.num_symbols();
    let (h, t) = (guards.head.len(), guards.tail.len());
    if y.len() != h + ns + t {
        return Err(Error::param(
            "y",
            format!("expected {} statistics, got {}", h + ns + t, y.len()),
        ));
    }
    let q = mapper.constellation.order();
    let delta = |s: usize| {
        let mut row = vec![0.0; q];
        row[s] = 1.0;
        row
    };
    let mut la = vec![0.0; n];
    let mut trace = Vec::with_capacity(schedule.global_iters);
    let mut last = None;
    let mut posteriors = Vec::new();
    for g in 0..schedule.global_iters {
        let mut priors: Vec<Vec<f64>> = guards.head.iter().map(|&s| delta(s)).collect();
        priors.extend(mapper.symbol_priors(&la));
        priors.extend(guards.tail.iter().map(|&s| delta(s)));
        let app = detect(y, aux, &mapper.constellation, &priors)?;
        posteriors = app[h..h + ns].to_vec();
        let channel = mapper.extrinsic(&posteriors, &la);
        let out = code.decode(&channel, schedule.local_iters);
        trace.push(soft_bit_information(&out.posterior));
        let valid = out.valid;
        la = out.extrinsic.clone();
        last = Some((out, g + 1));
        if valid {
            break;
        }
    }
    let (out, iters) = last.expect("at least one global iteration");
    let bits = out.hard_bits();
    Ok(TurboOutput {
        info_bits: bits[..code.k()].to_vec(),
        codeword_bits: bits,
        converged: out.valid,
        global_iterations: iters,
        mi_trace: trace,
        detector_posteriors: posteriors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coded::{LdpcCode, PassThrough};
    use crate::dsp::C64;
    use crate::waveform::{build_constellation, ConstellationLabel};
    use rand::Rng as _;

    fn mapper(label: ConstellationLabel, n: usize) -> BitMapper {
        BitMapper::new(build_constellation(label, None).unwrap(), n, 7)
    }

    #[test]
    fn interleaver_is_a_permutation() {
        let m = mapper(ConstellationLabel::Qpsk, 1008);
        let mut seen = m.interleaver().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..1008).collect::<Vec<_>>());
        for b in [0, 17, 1007] {
            assert_eq!(m.deinterleave_index(m.interleave_index(b)), b);
        }
    }

    #[test]
    fn confident_priors_select_the_transmitted_symbols() {
        for label in [ConstellationLabel::Qpsk, ConstellationLabel::Psk8, ConstellationLabel::Apsk32] {
            let m = mapper(label, 1008);
            let mut rng = seed::stream(3, &[]);
            let bits: Vec<u8> = (0..1008).map(|_| rng.random_range(0..2)).collect();
            let llrs: Vec<f64> = bits.iter().map(|&b| if b == 0 { 30.0 } else { -30.0 }).collect();
            let sym = m.symbols(&bits);
            assert_eq!(sym.len(), 1008usize.div_ceil(m.bits_per_symbol()));
            for (row, &s) in m.symbol_priors(&llrs).iter().zip(&sym) {
                assert!(row[s] > 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn extrinsic_excludes_the_own_prior() {
        let m = mapper(ConstellationLabel::Qpsk, 8);
        let uniform = vec![vec![0.25; 4]; 4];
        let flat = m.extrinsic(&uniform, &[0.0; 8]);
        assert!(flat.iter().all(|e| e.abs() < 1e-12));
        let la = [3.0, -2.0, 0.5, 1.0, -1.0, 2.0, 0.0, 4.0];
        let priors = m.symbol_priors(&la);
        let e = m.extrinsic(&priors, &la);
        assert!(e.iter().all(|v| v.abs() < 1e-9), "{e:?}");
    }

    #[test]
    fn noiseless_channel_decodes_in_one_pass() {
        let code = LdpcCode::new(1008, 0.5, 2).unwrap();
        let m = mapper(ConstellationLabel::Qpsk, 1008);
        let mut rng = seed::stream(11, &[]);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let word = code.encode(&info).unwrap();
        let sym = m.symbols(&word);
        let y = StatBlock::from_scalars(m.constellation.map(&sym));
        let aux = AuxChannelSpec::memoryless(C64::new(1.0, 0.0), 0.01, 0.0).unwrap();
        let out = run_iterative_receiver(&y, &aux, &m, &Guards::default(), &code, IterationSchedule::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.global_iterations, 1);
        assert_eq!(out.info_bits, info);
    }

    #[test]
    fn pass_through_decoder_reproduces_uncoded_posteriors() {
        let m = mapper(ConstellationLabel::Qpsk, 400);
        let mut rng = seed::stream(12, &[]);
        let sym: Vec<usize> = m.constellation.random_indices(&mut rng, 200);
        let y: Vec<C64> = m
            .constellation
            .map(&sym)
            .iter()
            .map(|x| x + C64::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)))
            .collect();
        let y = StatBlock::from_scalars(y);
        let aux = AuxChannelSpec::memoryless(C64::new(1.0, 0.0), 0.1, 0.0).unwrap();
        let direct = detect(&y, &aux, &m.constellation, &vec![vec![0.25; 4]; 200]).unwrap();
        let out = run_iterative_receiver(
            &y,
            &aux,
            &m,
            &Guards::default(),
            &PassThrough { n: 400 },
            IterationSchedule::new(3, 1).unwrap(),
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.global_iterations, 3);
        assert_eq!(out.detector_posteriors, direct);
    }

    #[test]
    fn soft_information_limits() {
        assert!(soft_bit_information(&[0.0; 4]).abs() < 1e-12);
        assert!((soft_bit_information(&[40.0, -40.0]) - 1.0).abs() < 1e-9);
    }
}
