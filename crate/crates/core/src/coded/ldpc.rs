use std::collections::HashSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

/// Magnitude cap on every log-likelihood ratio exchanged in the receiver.
pub const LLR_CLIP: f64 = 50.0;

/// Soft-in soft-out decoder. LLRs are `ln P(b = 0) / P(b = 1)`.
pub trait SoftDecoder: Sync {
    /// Codeword length.
    fn n(&self) -> usize;
    /// Information bits per codeword; they occupy positions `0..k`.
    fn k(&self) -> usize;
    fn decode(&self, channel: &[f64], iterations: usize) -> DecoderOutput;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    /// Posterior minus channel input, per codeword bit.
    pub extrinsic: Vec<f64>,
    pub posterior: Vec<f64>,
    /// All parity checks satisfied by the hard decisions.
    pub valid: bool,
    pub iterations: usize,
}

impl DecoderOutput {
    pub fn hard_bits(&self) -> Vec<u8> {
        self.posterior.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

/// Decoder that adds nothing: zero extrinsic information and never valid.
#[derive(Debug, Clone, Copy)]
pub struct PassThrough {
    pub n: usize,
}

impl SoftDecoder for PassThrough {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.n
    }

    fn decode(&self, channel: &[f64], _iterations: usize) -> DecoderOutput {
        DecoderOutput {
            extrinsic: vec![0.0; channel.len()],
            posterior: channel.to_vec(),
            valid: false,
            iterations: 0,
        }
    }
}

/// Systematic LDPC code `H = [A | B]` with a column-weight-3 information
/// part `A` and a dual-diagonal parity part `B` (`B[i][i] = B[i][i-1] = 1`),
/// which admits linear-time encoding by accumulation. `A` is drawn with
/// balanced row degrees and no length-4 cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    /// Checks touched by each information bit.
    info_rows: Vec<[usize; 3]>,
}

const INFO_DEGREE: usize = 3;

impl LdpcCode {
    /// Code of length `n` and about `rate * n` information bits.
    pub fn new(n: usize, rate: f64, seed_value: u64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::param("rate", format!("{rate} is outside (0, 1)")));
        }
        let k = (rate * n as f64).round() as usize;
        let m = n.saturating_sub(k);
        if k == 0 || m < 2 * INFO_DEGREE {
            return Err(Error::param("n", format!("length {n} is too short for rate {rate}")));
        }
        let mut rng = seed::stream(seed_value, &[0x6c64, n as u64, k as u64]);
        let mut pairs: HashSet<(usize, usize)> = (1..m).map(|i| (i - 1, i)).collect();
        let mut degree = vec![0usize; m];
        let mut info_rows = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<([usize; 3], usize)> = None;
            for _ in 0..200 {
                let mut rows = [0usize; INFO_DEGREE];
                for r in 0..INFO_DEGREE {
                    rows[r] = loop {
                        let a = rng.random_range(0..m);
                        let b = rng.random_range(0..m);
                        let pick = if degree[a] <= degree[b] { a } else { b };
                        if !rows[..r].contains(&pick) {
                            break pick;
                        }
                    };
                }
                let clashes = (0..INFO_DEGREE)
                    .flat_map(|i| (i + 1..INFO_DEGREE).map(move |j| (i, j)))
                    .filter(|&(i, j)| pairs.contains(&ordered(rows[i], rows[j])))
                    .count();
                if best.is_none_or(|(_, c)| clashes < c) {
                    best = Some((rows, clashes));
                }
                if clashes == 0 {
                    break;
                }
            }
            let (rows, _) = best.expect("at least one attempt");
            for i in 0..INFO_DEGREE {
                degree[rows[i]] += 1;
                for j in i + 1..INFO_DEGREE {
                    pairs.insert(ordered(rows[i], rows[j]));
                }
            }
            info_rows.push(rows);
        }
        let mut checks = vec![Vec::new(); m];
        for (v, rows) in info_rows.iter().enumerate() {
            for &r in rows {
                checks[r].push(v);
            }
        }
        for (i, c) in checks.iter_mut().enumerate() {
            if i > 0 {
                c.push(k + i - 1);
            }
            c.push(k + i);
        }
        Ok(LdpcCode { n, k, checks, info_rows })
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Number of length-4 cycles (pairs of variables sharing two checks).
    pub fn four_cycles(&self) -> usize {
        let mut seen = HashSet::new();
        let mut count = 0;
        for c in &self.checks {
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    let key = ordered(c[i], c[j]);
                    if !seen.insert(key) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// Systematic codeword `[info | parity]`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::param("info", format!("expected {} bits, got {}", self.k, info.len())));
        }
        let m = self.checks.len();
        let mut s = vec![0u8; m];
        for (v, rows) in self.info_rows.iter().enumerate() {
            if info[v] & 1 == 1 {
                for &r in rows {
                    s[r] ^= 1;
                }
            }
        }
        let mut word = info.to_vec();
        let mut p = 0u8;
        for si in s {
            p ^= si;
            word.push(p);
        }
        Ok(word)
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|c| c.iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

impl SoftDecoder for LdpcCode {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    /// Flooding sum-product with the tanh rule; stops as soon as the hard
    /// decisions satisfy every check.
    fn decode(&self, channel: &[f64], iterations: usize) -> DecoderOutput {
        assert_eq!(channel.len(), self.n, "channel LLR length");
        let mut c2v: Vec<Vec<f64>> = self.checks.iter().map(|c| vec![0.0; c.len()]).collect();
        let mut total: Vec<f64> = channel.iter().map(|&l| clip(l)).collect();
        let mut hard: Vec<u8> = total.iter().map(|&l| u8::from(l < 0.0)).collect();
        let mut valid = self.syndrome_ok(&hard);
        let mut done = 0;
        let mut t = Vec::new();
        let mut prefix = Vec::new();
        while !valid && done < iterations {
            for (c, vars) in self.checks.iter().enumerate() {
                let msgs = &mut c2v[c];
                t.clear();
                t.extend(vars.iter().zip(msgs.iter()).map(|(&v, &old)| (0.5 * (total[v] - old)).tanh()));
                prefix.clear();
                let mut acc = 1.0;
                for &x in &t {
                    prefix.push(acc);
                    acc *= x;
                }
                let mut suffix = 1.0;
                for i in (0..t.len()).rev() {
                    let prod = (prefix[i] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    msgs[i] = clip(2.0 * prod.atanh());
                    suffix *= t[i];
                }
            }
            total.copy_from_slice(channel);
            total.iter_mut().for_each(|l| *l = clip(*l));
            for (c, vars) in self.checks.iter().enumerate() {
                for (&v, &msg) in vars.iter().zip(&c2v[c]) {
                    total[v] += msg;
                }
            }
            done += 1;
            hard = total.iter().map(|&l| u8::from(l < 0.0)).collect();
            valid = self.syndrome_ok(&hard);
        }
        DecoderOutput {
            extrinsic: total.iter().zip(channel).map(|(t, c)| clip(t - clip(*c))).collect(),
            posterior: total,
            valid,
            iterations: done,
        }
    }
}
