use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use super::auxiliary::UngerboeckSpec;
use crate::dsp::C64;
use crate::error::{Error, Result};
use crate::volterra::GramSequence;

/// Frequency grid used for the spectral solve.
pub const CS_FFT_SIZE: usize = 1024;

fn to_rows(m: &DMatrix<C64>) -> Vec<C64> {
    let d = m.nrows();
    (0..d * d).map(|k| m[(k / d, k % d)]).collect()
}

fn identity(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

/// Hermitian square root and inverse square root of a positive definite matrix.
fn sqrt_pair(r: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let eig = r.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::param("feature_cov", "must be positive definite"));
    }
    let v = &eig.eigenvectors;
    let f = |p: f64| {
        let diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::new(e.powf(p), 0.0)));
        v * diag * v.adjoint()
    };
    Ok((f(0.5), f(-0.5)))
}

/// `sum_l A_l e^{-j w l}` for lags given as `lag -> block`.
fn spectrum(blocks: &[(isize, DMatrix<C64>)], w: f64, d: usize) -> DMatrix<C64> {
    let mut s = DMatrix::zeros(d, d);
    for (l, b) in blocks {
        s += b * C64::from_polar(1.0, -w * *l as f64);
    }
    s
}

/// Every lag `(1/n) sum_k S_k e^{j 2 pi k l / n}` of a sampled spectrum,
/// indexed by `l mod n`.
fn all_lags(spec: &[DMatrix<C64>], d: usize) -> Vec<DMatrix<C64>> {
    let n = spec.len();
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = vec![DMatrix::zeros(d, d); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for r in 0..d {
        for q in 0..d {
            for (b, m) in buf.iter_mut().zip(spec) {
                *b = m[(r, q)];
            }
            ifft.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                o[(r, q)] = b / n as f64;
            }
        }
    }
    out
}

fn two_sided(g: &GramSequence, map: impl Fn(DMatrix<C64>) -> DMatrix<C64>) -> Vec<(isize, DMatrix<C64>)> {
    let lmax = g.max_lag() as isize;
    (-lmax..=lmax).map(|l| (l, map(g.block(l)))).collect()
}

fn design_variance(g: &GramSequence, n0: f64) -> f64 {
    let sigma2 = 2.0 * n0;
    let floor = 1e-9 * g.block(0).trace().re.abs().max(1e-300) / g.dim as f64;
    if sigma2 < floor {
        log::warn!("noise variance {sigma2:.3e} regularized to {floor:.3e} for channel shortening");
        floor
    } else {
        sigma2
    }
}

/// `H = I / 2N0`, `G^r = g_l / 2N0` truncated to `L_r` lags.
pub fn truncated_target(g: &GramSequence, n0: f64, lr: usize) -> UngerboeckSpec {
    let sigma2 = design_variance(g, n0);
    let d = g.dim;
    let keep = lr.min(g.max_lag());
    UngerboeckSpec {
        dim: d,
        h: vec![to_rows(&(identity(d) / C64::new(sigma2, 0.0)))],
        gr: g.lags[..=keep].iter().map(|b| b.iter().map(|v| v / sigma2).collect()).collect(),
    }
}

/// Closed-form channel shortener `H^r` and target `G^r` (memory `L_r`)
/// maximizing the Gaussian-input achievable rate of the Ungerboeck model
/// with Gram sequence `g` and noise `2 N0 g`.
///
/// Inputs are first whitened by the feature covariance. The target follows
/// from the lags `c_l` of `C(w) = s2 (G(w) + s2 I)^{-1}`: `I + G^r` is the
/// banded spectrum whose inverse reproduces `c_l` for `|l| <= L_r` (the
/// maximum-entropy extension), and `H^r(w) = (G(w) + s2 I)^{-1} (I + G^r(w))`.
/// When `L_r` reaches the memory of `g` the exact trivial solution is
/// returned.
pub fn channel_shortening_optimize(g: &GramSequence, n0: f64, lr: usize) -> Result<UngerboeckSpec> {
    if lr >= g.memory {
        return Ok(truncated_target(g, n0, g.memory));
    }
    let d = g.dim;
    let sigma2 = design_variance(g, n0);
    let (rh, rhi) = sqrt_pair(&g.feature_cov_matrix())?;
    let gw = two_sided(g, |b| &rh * b * &rh);
    let n = CS_FFT_SIZE;
    let eye = identity(d);
    let inv_spec: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            let w = 2.0 * PI * k as f64 / n as f64;
            let m = spectrum(&gw, w, d) + &eye * C64::new(sigma2, 0.0);
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            m.cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| Error::param("gram", "G(w) + 2N0 I is not positive definite"))
        })
        .collect::<Result<_>>()?;
    let inv_lags = all_lags(&inv_spec, d);
    let c: Vec<DMatrix<C64>> = (0..=lr).map(|l| &inv_lags[l] * C64::new(sigma2, 0.0)).collect();
    let p = lr + 1;
    let mut t = DMatrix::zeros(p * d, p * d);
    for i in 0..p {
        for k in 0..p {
            let blk = if i >= k { c[i - k].clone() } else { c[k - i].adjoint() };
            t.view_mut((i * d, k * d), (d, d)).copy_from(&blk);
        }
    }
    let mut e0 = DMatrix::zeros(p * d, d);
    e0.view_mut((0, 0), (d, d)).copy_from(&eye);
    let v = t
        .lu()
        .solve(&e0)
        .ok_or_else(|| Error::param("gram", "singular Toeplitz section in the target solve"))?;
    let vk = |k: usize| v.view((k * d, 0), (d, d)).into_owned();
    let v0_inv = vk(0)
        .try_inverse()
        .ok_or_else(|| Error::param("gram", "singular leading block in the target solve"))?;
    let q: Vec<DMatrix<C64>> = (0..p)
        .map(|l| {
            let mut acc = DMatrix::zeros(d, d);
            for m in 0..p - l {
                acc += vk(m + l) * &v0_inv * vk(m).adjoint();
            }
            acc
        })
        .collect();
    let q_blocks: Vec<(isize, DMatrix<C64>)> = (-(lr as isize)..=lr as isize)
        .map(|l| (l, if l >= 0 { q[l as usize].clone() } else { q[(-l) as usize].adjoint() }))
        .collect();
    let h_spec: Vec<DMatrix<C64>> = inv_spec
        .iter()
        .enumerate()
        .map(|(k, m)| m * spectrum(&q_blocks, 2.0 * PI * k as f64 / n as f64, d))
        .collect();
    let limit = (n / 4) as isize;
    let h_all = all_lags(&h_spec, d);
    let h_lags: Vec<DMatrix<C64>> = (-limit..=limit)
        .map(|l| h_all[l.rem_euclid(n as isize) as usize].clone())
        .collect();
    let peak = h_lags.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let h_max = (0..=limit as usize)
        .rev()
        .find(|&l| {
            let a = h_lags[(limit as usize) + l].norm();
            let b = h_lags[(limit as usize) - l].norm();
            a.max(b) >= 1e-12 * peak
        })
        .unwrap_or(0);
    let h: Vec<Vec<C64>> = (limit as usize - h_max..=limit as usize + h_max)
        .map(|i| to_rows(&(&rh * &h_lags[i] * &rhi)))
        .collect();
    let gr: Vec<Vec<C64>> = q
        .iter()
        .enumerate()
        .map(|(l, ql)| {
            let mut b = if l == 0 { ql - &eye } else { ql.clone() };
            b = &rhi * b * &rhi;
            if l == 0 {
                b = (&b + b.adjoint()) * C64::new(0.5, 0.0);
            }
            to_rows(&b)
        })
        .collect();
    Ok(UngerboeckSpec { dim: d, h, gr })
}

/// Achievable rate (nats per symbol) of the Ungerboeck law `aux` on the
/// model `y = G s + n`, `n ~ CN(0, 2N0 G)`, when the features `s` are
/// Gaussian with covariance `g.feature_cov`. Evaluated spectrally on
/// `grid` frequencies.
pub fn gaussian_gmi(g: &GramSequence, n0: f64, aux: &UngerboeckSpec, grid: usize) -> f64 {
    let d = g.dim;
    let sigma2 = 2.0 * n0;
    let r = g.feature_cov_matrix();
    let r_inv = r.clone().try_inverse().expect("feature covariance is invertible");
    let eye = identity(d);
    let gb = two_sided(g, |b| b);
    let hb: Vec<(isize, DMatrix<C64>)> = (0..aux.h.len())
        .map(|i| {
            let l = i as isize - aux.h_max() as isize;
            (l, aux.h_block(l))
        })
        .collect();
    let lr = aux.memory() as isize;
    let grb: Vec<(isize, DMatrix<C64>)> = (-lr..=lr).map(|l| (l, aux.gr_block(l))).collect();
    let mut total = 0.0;
    for k in 0..grid {
        let w = 2.0 * PI * k as f64 / grid as f64;
        let gs = spectrum(&gb, w, d);
        let hs = spectrum(&hb, w, d);
        let grs = spectrum(&grb, w, d);
        let a = &eye + &r * &grs;
        let det = a.determinant();
        if !(det.re > 0.0) {
            return f64::NEG_INFINITY;
        }
        let p = match (&r_inv + &grs).try_inverse() {
            Some(p) => p,
            None => return f64::NEG_INFINITY,
        };
        let cov_y = &gs * &r * &gs + &gs * C64::new(sigma2, 0.0);
        let term = (&hs * &r * &gs).trace().re * 2.0 - (&grs * &r).trace().re + det.ln().re
            - (&hs * p * hs.adjoint() * cov_y).trace().re;
        total += term;
    }
    total / grid as f64
}
