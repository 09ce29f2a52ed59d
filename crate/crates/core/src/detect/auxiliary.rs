use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};
use crate::volterra::StatBlock;

/// Ungerboeck-form auxiliary law
/// `q(y|x) ∝ exp(2 Re(y^H H x) - x^H G x)` with banded Toeplitz `H`, `G`.
///
/// `h` holds lags `-h_max ..= h_max` of the shortener and `gr` lags
/// `0 ..= L_r` of the target response, each a `dim x dim` row-major block;
/// negative target lags follow from `g_{-l} = g_l^H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UngerboeckSpec {
    pub dim: usize,
    pub h: Vec<Vec<C64>>,
    pub gr: Vec<Vec<C64>>,
}

impl UngerboeckSpec {
    pub fn memory(&self) -> usize {
        self.gr.len() - 1
    }

    pub fn h_max(&self) -> usize {
        self.h.len() / 2
    }

    pub fn h_block(&self, l: isize) -> DMatrix<C64> {
        let idx = l + self.h_max() as isize;
        if idx < 0 || idx as usize >= self.h.len() {
            return DMatrix::zeros(self.dim, self.dim);
        }
        DMatrix::from_row_slice(self.dim, self.dim, &self.h[idx as usize])
    }

    pub fn gr_block(&self, l: isize) -> DMatrix<C64> {
        let a = l.unsigned_abs();
        if a >= self.gr.len() {
            return DMatrix::zeros(self.dim, self.dim);
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.gr[a]);
        if l >= 0 {
            m
        } else {
            m.adjoint()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d2 = self.dim * self.dim;
        if self.dim == 0 || self.gr.is_empty() || self.h.len().is_multiple_of(2) {
            return Err(Error::param("aux", "empty target response or even-length shortener"));
        }
        if self.h.iter().chain(&self.gr).any(|b| b.len() != d2) {
            return Err(Error::param("aux", "block dimensions are inconsistent"));
        }
        let g0 = self.gr_block(0);
        let dev = (&g0 - g0.adjoint()).norm();
        if dev > 1e-9 * (1.0 + g0.norm()) {
            return Err(Error::NonHermitian(dev));
        }
        Ok(())
    }

    /// Shortener output `z_m = sum_l H_l^H y_{m+l}` (zero outside the block).
    pub fn filter(&self, y: &StatBlock) -> StatBlock {
        let d = self.dim;
        let k_len = y.len();
        let hm = self.h_max() as isize;
        let mut z = StatBlock::zeros(d, k_len);
        for m in 0..k_len {
            let out = z.at_mut(m);
            for (idx, blk) in self.h.iter().enumerate() {
                let l = idx as isize - hm;
                let src = m as isize + l;
                if src < 0 || src >= k_len as isize {
                    continue;
                }
                let yv = y.at(src as usize);
                for i in 0..d {
                    let mut acc = ZERO;
                    for r in 0..d {
                        acc += blk[r * d + i].conj() * yv[r];
                    }
                    out[i] += acc;
                }
            }
        }
        z
    }
}

/// Auxiliary channel used by a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxChannelSpec {
    /// `y_k = c x_k + n_k`, `E|n_k|^2 = 2 (N0 + N_I)`.
    Memoryless { gain: C64, n0: f64, n_i: f64 },
    Ungerboeck(UngerboeckSpec),
}

impl AuxChannelSpec {
    pub fn memoryless(gain: C64, n0: f64, n_i: f64) -> Result<Self> {
        if !(n0 + n_i > 0.0) || n_i < 0.0 {
            return Err(Error::param("n_total", "N0 + N_I must be positive and N_I >= 0"));
        }
        Ok(AuxChannelSpec::Memoryless { gain, n0, n_i })
    }

    pub fn memory(&self) -> usize {
        match self {
            AuxChannelSpec::Memoryless { .. } => 0,
            AuxChannelSpec::Ungerboeck(u) => u.memory(),
        }
    }
}
