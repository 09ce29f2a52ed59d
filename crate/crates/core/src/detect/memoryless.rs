use super::bcjr::{log_priors, PosteriorBlock};
use crate::dsp::{log_sum_exp, C64};
use crate::error::{Error, Result};
use crate::waveform::Constellation;

/// Symbol-by-symbol posteriors for `y_k = c x_k + n_k` with
/// `E|n_k|^2 = 2 n_total`.
///
/// Likelihoods are `exp(-|y - c x|^2 / (2 n_total))`, so `log_py` and
/// `log_pyx` omit the Gaussian normalization, which cancels in rate
/// estimates.
pub fn memoryless_detect(
    y: &[C64],
    constellation: &Constellation,
    gain: C64,
    n_total: f64,
    priors: Option<&[Vec<f64>]>,
    truth: Option<&[usize]>,
) -> Result<PosteriorBlock> {
    if !(n_total > 0.0) {
        return Err(Error::param("n_total", "N0 + N_I must be positive"));
    }
    let m = constellation.order();
    let lp = log_priors(priors, y.len(), m)?;
    let scaled: Vec<C64> = constellation.points.iter().map(|p| p * gain).collect();
    let inv = 1.0 / (2.0 * n_total);
    let mut log_py = 0.0;
    let mut log_pyx = truth.map(|_| 0.0);
    let mut posteriors = Vec::with_capacity(y.len());
    let mut terms = vec![0.0; m];
    for (k, &yk) in y.iter().enumerate() {
        for a in 0..m {
            terms[a] = -(yk - scaled[a]).norm_sqr() * inv + lp[k][a];
        }
        let norm = log_sum_exp(&terms);
        if !norm.is_finite() {
            return Err(Error::NonFiniteLikelihood { block: 0 });
        }
        log_py += norm;
        if let (Some(acc), Some(x)) = (log_pyx.as_mut(), truth) {
            *acc -= (yk - scaled[x[k]]).norm_sqr() * inv;
        }
        posteriors.push(terms.iter().map(|t| (t - norm).exp()).collect());
    }
    Ok(PosteriorBlock {
        m,
        posteriors,
        log_py,
        log_pyx,
    })
}
