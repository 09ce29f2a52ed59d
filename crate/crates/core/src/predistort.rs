//! Dynamic data predistortion: a lookup table from each symbol and its
//! `L_p` neighbours on either side to the value actually transmitted.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::channel::TransponderSpec;
use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed;
use crate::waveform::{matched_filter_samples, shape_symbols, Constellation, PulseShape};

pub const MAX_LP: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredistorterLut {
    pub lp: usize,
    pub order: usize,
    /// Entry for tuple `(x_{k-Lp}, ..., x_{k+Lp})`, read as a base-`M`
    /// number with `x_{k-Lp}` most significant.
    pub table: Vec<C64>,
}

impl PredistorterLut {
    pub fn identity(constellation: &Constellation, lp: usize) -> Result<Self> {
        if lp > MAX_LP {
            return Err(Error::param("lp", format!("{lp} > {MAX_LP}")));
        }
        let m = constellation.order();
        let len = m.pow(2 * lp as u32 + 1);
        let stride = m.pow(lp as u32);
        let table = (0..len).map(|t| constellation.points[(t / stride) % m]).collect();
        Ok(PredistorterLut { lp, order: m, table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn window(&self) -> usize {
        2 * self.lp + 1
    }

    /// Tuple index of the window centered on `k`, wrapping cyclically.
    pub fn tuple_at(&self, indices: &[usize], k: usize) -> usize {
        let n = indices.len() as isize;
        (0..self.window()).fold(0, |acc, j| {
            let pos = (k as isize + j as isize - self.lp as isize).rem_euclid(n) as usize;
            acc * self.order + indices[pos]
        })
    }

    /// Symbol indices `(x_{k-Lp}, ..., x_{k+Lp})` addressed by tuple `t`.
    pub fn digits(&self, mut t: usize) -> Vec<usize> {
        let mut d = vec![0; self.window()];
        for slot in d.iter_mut().rev() {
            *slot = t % self.order;
            t /= self.order;
        }
        d
    }

    /// Mean entry power under i.u.d. symbols.
    pub fn mean_power(&self) -> f64 {
        self.table.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tuple_index", "real", "imag"])?;
        for (i, v) in self.table.iter().enumerate() {
            w.write_record([i.to_string(), format!("{:.17e}", v.re), format!("{:.17e}", v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, order: usize, lp: usize) -> Result<Self> {
        let expected = order.pow(2 * lp as u32 + 1);
        let mut table = vec![None; expected];
        let mut rdr = csv::Reader::from_reader(input);
        for row in rdr.deserialize::<(usize, f64, f64)>() {
            let (i, re, im) = row?;
            let slot = table
                .get_mut(i)
                .ok_or_else(|| Error::param("lut", format!("tuple index {i} out of range")))?;
            *slot = Some(C64::new(re, im));
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::param("lut", format!("missing tuple {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredistorterLut { lp, order, table })
    }
}

/// Sliding-window lookup with cyclic extension at both ends.
pub fn apply_predistortion(indices: &[usize], lut: &PredistorterLut) -> Vec<C64> {
    if indices.is_empty() {
        return Vec::new();
    }
    let head = lut.order.pow(2 * lut.lp as u32);
    let n = indices.len();
    let mut t = lut.tuple_at(indices, 0);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(lut.table[t]);
        t = (t % head) * lut.order + indices[(k + lut.lp + 1) % n];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub iterations: usize,
    pub damping: f64,
    pub tolerance: f64,
    pub blocks: usize,
    pub block_len: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            iterations: 50,
            damping: 0.25,
            tolerance: 1e-4,
            blocks: 16,
            block_len: 2048,
            seed: 0x5eed,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    pub max_move: f64,
    pub gain: C64,
}

/// Chain and reference matched-filter center samples for one block.
#[derive(Debug, Clone)]
pub struct CenterSamples {
    /// Matched-filter outputs of the transponder chain.
    pub chain: Vec<C64>,
    /// Matched-filter outputs of the pulse alone (no transponder).
    pub reference: Vec<C64>,
    /// Epochs far enough from the block edges to be free of start-up effects.
    pub interior: std::ops::Range<usize>,
}

impl CenterSamples {
    /// Complex least-squares gain from reference to chain over the interior.
    pub fn gain(&self) -> C64 {
        let r = self.interior.clone();
        let num: C64 = self.reference[r.clone()].iter().zip(&self.chain[r.clone()]).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = self.reference[r].iter().map(|a| a.norm_sqr()).sum();
        num / den
    }

    /// `mean |y_k / c - ref_k|^2` over the interior for a given gain.
    pub fn mse_with(&self, c: C64) -> f64 {
        let r = self.interior.clone();
        let n = r.len() as f64;
        self.chain[r.clone()]
            .iter()
            .zip(&self.reference[r])
            .map(|(y, x)| (y / c - x).norm_sqr())
            .sum::<f64>()
            / n
    }

    pub fn mse(&self) -> f64 {
        self.mse_with(self.gain())
    }
}

fn edge_symbols(spec: &TransponderSpec, pulse: &PulseShape, lp: usize) -> usize {
    let span = 2 * pulse.center() + spec.imux.half_len() + spec.omux.half_len();
    span.div_ceil(pulse.samples_per_symbol) + lp + 1
}

/// Push one block of symbol indices through `lut` (or none) and the
/// single-carrier chain, returning matched-filter center samples.
pub fn center_samples(
    spec: &TransponderSpec,
    pulse: &PulseShape,
    constellation: &Constellation,
    lut: Option<&PredistorterLut>,
    indices: &[usize],
) -> Result<CenterSamples> {
    let symbols = constellation.map(indices);
    let tx = match lut {
        Some(l) => apply_predistortion(indices, l),
        None => symbols.clone(),
    };
    let k = indices.len();
    let reference = matched_filter_samples(&shape_symbols(&symbols, pulse, 1.0), pulse, k);
    let out = crate::channel::apply_transponder(&shape_symbols(&tx, pulse, 1.0), spec)?;
    let chain = matched_filter_samples(&out, pulse, k);
    let edge = edge_symbols(spec, pulse, lut.map_or(0, |l| l.lp));
    if k <= 2 * edge {
        return Err(Error::BufferTooShort { len: k, needed: 2 * edge + 1 });
    }
    Ok(CenterSamples {
        chain,
        reference,
        interior: edge..k - edge,
    })
}

struct TupleStats {
    sum_chain: Vec<C64>,
    sum_ref: Vec<C64>,
    count: Vec<u32>,
    cross: C64,
    ref_power: f64,
}

impl TupleStats {
    fn new(len: usize) -> Self {
        TupleStats {
            sum_chain: vec![ZERO; len],
            sum_ref: vec![ZERO; len],
            count: vec![0; len],
            cross: ZERO,
            ref_power: 0.0,
        }
    }

    fn merge(&mut self, other: &TupleStats) {
        for t in 0..self.count.len() {
            self.sum_chain[t] += other.sum_chain[t];
            self.sum_ref[t] += other.sum_ref[t];
            self.count[t] += other.count[t];
        }
        self.cross += other.cross;
        self.ref_power += other.ref_power;
    }
}

/// Largest entry magnitude the HPA can be driven with.
fn entry_limit(spec: &TransponderSpec, pulse: &PulseShape, constellation: &Constellation) -> f64 {
    let max_in = spec.hpa.max_input();
    if max_in.is_finite() {
        let peak_tap = pulse.taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        max_in / (spec.input_gain() * peak_tap)
    } else {
        8.0 * constellation.peak()
    }
}

/// Damped fixed-point training of the LUT against the single-carrier chain.
///
/// Every iteration re-simulates the same training blocks with the current
/// table, averages the chain's matched-filter center sample (scaled by the
/// least-squares gain) per neighbourhood tuple, and moves each entry a
/// `damping` fraction of the way toward the reference. Entries are then
/// rescaled to the constellation's mean energy.
pub fn train_predistorter(
    spec: &TransponderSpec,
    pulse: &PulseShape,
    constellation: &Constellation,
    lp: usize,
    opts: &TrainOptions,
) -> Result<(PredistorterLut, TrainReport)> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::param("damping", "must lie in (0, 1]"));
    }
    if opts.blocks == 0 || opts.iterations == 0 {
        return Err(Error::param("iterations/blocks", "must be positive"));
    }
    let mut lut = PredistorterLut::identity(constellation, lp)?;
    let energy = constellation.energy();
    let limit = entry_limit(spec, pulse, constellation);
    let blocks: Vec<Vec<usize>> = (0..opts.blocks)
        .map(|b| constellation.random_indices(&mut seed::stream(opts.seed, &[b as u64]), opts.block_len))
        .collect();
    let mut report = TrainReport {
        iterations: 0,
        converged: false,
        max_move: f64::INFINITY,
        gain: C64::new(1.0, 0.0),
    };
    for iter in 0..opts.iterations {
        let per_block = opts.exec.try_map_range(blocks.len(), |b| {
            let cs = center_samples(spec, pulse, constellation, Some(&lut), &blocks[b])?;
            let mut st = TupleStats::new(lut.len());
            for k in cs.interior.clone() {
                let t = lut.tuple_at(&blocks[b], k);
                st.sum_chain[t] += cs.chain[k];
                st.sum_ref[t] += cs.reference[k];
                st.count[t] += 1;
                st.cross += cs.reference[k].conj() * cs.chain[k];
                st.ref_power += cs.reference[k].norm_sqr();
            }
            Ok::<_, Error>(st)
        })?;
        let mut stats = TupleStats::new(lut.len());
        per_block.iter().for_each(|s| stats.merge(s));
        let gain = stats.cross / stats.ref_power;
        let mut next = lut.table.clone();
        for (t, v) in next.iter_mut().enumerate() {
            let n = stats.count[t];
            if n > 0 {
                let err = (stats.sum_ref[t] - stats.sum_chain[t] / gain) / n as f64;
                *v += err * opts.damping;
            }
        }
        let p = next.iter().map(|v| v.norm_sqr()).sum::<f64>() / next.len() as f64;
        let scale = (energy / p).sqrt();
        next.iter_mut().for_each(|v| *v *= scale);
        let mut max_move = 0.0f64;
        for (t, (new, old)) in next.iter().zip(&lut.table).enumerate() {
            if !(new.norm() <= limit) {
                return Err(Error::PredistorterDiverged {
                    tuple: lut.digits(t),
                    magnitude: new.norm(),
                    limit,
                });
            }
            max_move = max_move.max((new - old).norm());
        }
        lut.table = next;
        report = TrainReport {
            iterations: iter + 1,
            converged: max_move < opts.tolerance,
            max_move,
            gain,
        };
        log::debug!("predistorter iteration {}: max move {max_move:.3e}", iter + 1);
        if report.converged {
            break;
        }
    }
    Ok((lut, report))
}
