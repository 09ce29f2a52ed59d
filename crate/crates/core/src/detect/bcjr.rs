use std::io::Write;

use serde::{Deserialize, Serialize};

use super::auxiliary::UngerboeckSpec;
use crate::dsp::C64;
use crate::error::{Error, Result};
use crate::volterra::StatBlock;
use crate::waveform::Constellation;

/// Default ceiling on the number of trellis states `M^{L_r}`.
pub const STATE_CAP: usize = 4096;

/// Detector output for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorBlock {
    pub m: usize,
    /// `K x M` symbol posteriors; empty when not requested.
    pub posteriors: Vec<Vec<f64>>,
    /// `ln q(y)` under the auxiliary law, averaged over the priors.
    pub log_py: f64,
    /// `ln q(y | x)` for the supplied sequence.
    pub log_pyx: Option<f64>,
}

impl PosteriorBlock {
    /// Most likely symbol per epoch.
    pub fn hard_decisions(&self) -> Vec<usize> {
        self.posteriors
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (a, &p)| if p > best.1 { (a, p) } else { best })
                    .0
            })
            .collect()
    }

    /// Debug dump with columns `epoch, p0, p1, ...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["epoch".to_string()];
        header.extend((0..self.m).map(|a| format!("p{a}")));
        w.write_record(&header)?;
        for (k, row) in self.posteriors.iter().enumerate() {
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|p| format!("{p:.12e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BcjrOptions {
    pub posteriors: bool,
    pub state_cap: usize,
}

impl Default for BcjrOptions {
    fn default() -> Self {
        BcjrOptions {
            posteriors: true,
            state_cap: STATE_CAP,
        }
    }
}

/// Per-epoch log priors from probability rows (uniform when absent).
pub(crate) fn log_priors(priors: Option<&[Vec<f64>]>, k_len: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    match priors {
        None => Ok(vec![vec![-(m as f64).ln(); m]; k_len]),
        Some(p) => {
            if p.len() != k_len || p.iter().any(|r| r.len() != m) {
                return Err(Error::param("priors", format!("expected a {k_len} x {m} matrix")));
            }
            Ok(p.iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect())
        }
    }
}

struct Trellis {
    m: usize,
    l: usize,
    states: usize,
    /// `2 Re(z_k^H s_a)` per epoch and symbol.
    corr: Vec<Vec<f64>>,
    /// `s_a^H G_0 s_a`.
    self_term: Vec<f64>,
    /// `2 Re(s_a^H G_i s_b)` for `i = 1..=L`, flattened `a * M + b`.
    cross: Vec<Vec<f64>>,
}

impl Trellis {
    fn new(y: &StatBlock, aux: &UngerboeckSpec, constellation: &Constellation, cap: usize) -> Result<Self> {
        aux.validate()?;
        if y.dim != aux.dim {
            return Err(Error::param("y", format!("statistics have dimension {}, model {}", y.dim, aux.dim)));
        }
        let m = constellation.order();
        let l = aux.memory();
        let states = (m as f64).powi(l as i32);
        if states > cap as f64 {
            return Err(Error::StateCapExceeded {
                states: states.min(usize::MAX as f64) as usize,
                cap,
            });
        }
        let states = m.pow(l as u32);
        let d = aux.dim;
        let feats: Vec<Vec<C64>> = (0..m).map(|a| constellation.features(a, d)).collect();
        let quad = |blk: &[C64], a: usize, b: usize| -> C64 {
            let mut acc = C64::default();
            for i in 0..d {
                for j in 0..d {
                    acc += feats[a][i].conj() * blk[i * d + j] * feats[b][j];
                }
            }
            acc
        };
        let self_term = (0..m).map(|a| quad(&aux.gr[0], a, a).re).collect();
        let cross = (1..=l)
            .map(|i| {
                (0..m * m)
                    .map(|ab| 2.0 * quad(&aux.gr[i], ab / m, ab % m).re)
                    .collect()
            })
            .collect();
        let z = aux.filter(y);
        let corr = (0..z.len())
            .map(|k| {
                let zk = z.at(k);
                feats
                    .iter()
                    .map(|s| 2.0 * zk.iter().zip(s).map(|(zv, sv)| zv.conj() * sv).sum::<C64>().re)
                    .collect()
            })
            .collect();
        Ok(Trellis {
            m,
            l,
            states,
            corr,
            self_term,
            cross,
        })
    }

    fn branch(&self, k: usize, state: usize, a: usize) -> f64 {
        let mut g = self.corr[k][a] - self.self_term[a];
        let mut s = state;
        for i in 1..=self.l.min(k) {
            g -= self.cross[i - 1][a * self.m + s % self.m];
            s /= self.m;
        }
        g
    }

    fn next(&self, state: usize, a: usize) -> usize {
        if self.l == 0 {
            0
        } else {
            a + self.m * (state % (self.states / self.m))
        }
    }

    fn log_likelihood(&self, x: &[usize]) -> f64 {
        let mut total = 0.0;
        for k in 0..x.len() {
            let mut state = 0;
            for i in (1..=self.l.min(k)).rev() {
                state = state * self.m + x[k - i];
            }
            total += self.branch(k, state, x[k]);
        }
        total
    }
}

/// BCJR detection under `q(y|x) ∝ exp(2 Re(y^H H^r x) - x^H G^r x)`.
///
/// Priors are per-epoch probability rows; uniform when `None`. Symbols
/// before the block start are unknown and carry no interference terms,
/// so the trellis starts from a uniform state distribution and ends free.
/// `truth`, when given, is scored under the same law into `log_pyx`.
pub fn bcjr_detect(
    y: &StatBlock,
    aux: &UngerboeckSpec,
    constellation: &Constellation,
    priors: Option<&[Vec<f64>]>,
    truth: Option<&[usize]>,
) -> Result<PosteriorBlock> {
    bcjr_with(y, aux, constellation, priors, truth, BcjrOptions::default())
}

pub fn bcjr_with(
    y: &StatBlock,
    aux: &UngerboeckSpec,
    constellation: &Constellation,
    priors: Option<&[Vec<f64>]>,
    truth: Option<&[usize]>,
    opts: BcjrOptions,
) -> Result<PosteriorBlock> {
    let t = Trellis::new(y, aux, constellation, opts.state_cap)?;
    let k_len = y.len();
    let m = t.m;
    let lp = log_priors(priors, k_len, m)?;
    let ns = t.states;
    let mut alpha = vec![-(ns as f64).ln(); ns];
    let mut alphas = Vec::new();
    let mut log_py = 0.0;
    let mut scratch = vec![0.0; ns * m];
    let mut next = vec![0.0; ns];
    for k in 0..k_len {
        if opts.posteriors {
            alphas.push(alpha.clone());
        }
        let mut top = f64::NEG_INFINITY;
        for s in 0..ns {
            for a in 0..m {
                let v = alpha[s] + t.branch(k, s, a) + lp[k][a];
                scratch[s * m + a] = v;
                top = top.max(v);
            }
        }
        if !top.is_finite() {
            return Err(Error::NonFiniteLikelihood { block: 0 });
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..ns {
            for a in 0..m {
                next[t.next(s, a)] += (scratch[s * m + a] - top).exp();
            }
        }
        let total: f64 = next.iter().sum();
        log_py += top + total.ln();
        for (dst, v) in alpha.iter_mut().zip(&next) {
            *dst = (v / total).ln();
        }
    }
    let log_pyx = match truth {
        Some(x) => {
            if x.len() != k_len || x.iter().any(|&a| a >= m) {
                return Err(Error::param("truth", "sequence length or alphabet mismatch"));
            }
            Some(t.log_likelihood(x))
        }
        None => None,
    };
    if !log_py.is_finite() || log_pyx.is_some_and(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLikelihood { block: 0 });
    }
    let mut posteriors = Vec::new();
    if opts.posteriors {
        posteriors = vec![vec![0.0; m]; k_len];
        let mut beta = vec![0.0; ns];
        for k in (0..k_len).rev() {
            let a_k = &alphas[k];
            let mut top = f64::NEG_INFINITY;
            for s in 0..ns {
                for a in 0..m {
                    let g = t.branch(k, s, a) + lp[k][a];
                    let v = a_k[s] + g + beta[t.next(s, a)];
                    scratch[s * m + a] = g;
                    top = top.max(v);
                }
            }
            let row = &mut posteriors[k];
            let mut new_beta = vec![0.0; ns];
            let mut btop = f64::NEG_INFINITY;
            for s in 0..ns {
                let mut acc = 0.0;
                let mut local = f64::NEG_INFINITY;
                for a in 0..m {
                    let g = scratch[s * m + a];
                    let b = beta[t.next(s, a)];
                    row[a] += (a_k[s] + g + b - top).exp();
                    local = local.max(g + b);
                }
                if local.is_finite() {
                    for a in 0..m {
                        acc += (scratch[s * m + a] + beta[t.next(s, a)] - local).exp();
                    }
                    new_beta[s] = local + acc.ln();
                } else {
                    new_beta[s] = f64::NEG_INFINITY;
                }
                btop = btop.max(new_beta[s]);
            }
            let norm: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= norm);
            new_beta.iter_mut().for_each(|v| *v -= btop);
            beta = new_beta;
        }
    }
    Ok(PosteriorBlock {
        m,
        posteriors,
        log_py,
        log_pyx,
    })
}

/// Log-likelihood `ln q(y|x)` of one sequence under the Ungerboeck law,
/// computed from the explicit `K x K` block Toeplitz sections.
pub fn ungerboeck_log_likelihood(y: &StatBlock, aux: &UngerboeckSpec, constellation: &Constellation, x: &[usize]) -> f64 {
    let d = aux.dim;
    let k_len = x.len();
    let z = aux.filter(y);
    let s: Vec<Vec<C64>> = x.iter().map(|&a| constellation.features(a, d)).collect();
    let mut total = 0.0;
    for k in 0..k_len {
        total += 2.0 * z.at(k).iter().zip(&s[k]).map(|(a, b)| a.conj() * b).sum::<C64>().re;
        for mm in 0..k_len {
            let blk = aux.gr_block(k as isize - mm as isize);
            for i in 0..d {
                for j in 0..d {
                    total -= (s[k][i].conj() * blk[(i, j)] * s[mm][j]).re;
                }
            }
        }
    }
    total
}
