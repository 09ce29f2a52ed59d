use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::estimate::{evaluate_point, prepare_receiver, train_for, DetectorConfig, IrOptions, RatePoint};
use super::eta;
use super::system::SystemConfig;
use crate::dsp::parabola_vertex;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::predistort::PredistorterLut;

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ((lo + i as f64 * step) * 1e6).round() / 1e6).collect()
}

/// Coarse grid, drive sweep and SNR list of a packing search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
    pub w_scale: Vec<f64>,
    /// HPA input back-off values of the drive sweep.
    pub input_backoff_db: Vec<f64>,
    /// Re-evaluate at the vertex of a parabola through the best drives.
    pub refine_drive: bool,
    pub snr_db: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tau: steps(0.70, 1.00, 0.05),
            nu: steps(0.80, 1.05, 0.05),
            w_scale: vec![1.0, 1.1, 1.2, 1.3],
            input_backoff_db: vec![0.0, 1.5, 3.0, 4.5, 6.0],
            refine_drive: false,
            snr_db: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
        }
    }
}

impl SweepConfig {
    /// Only the orthogonal point `(1, 1, 1)`.
    pub fn baseline(snr_db: Vec<f64>, input_backoff_db: Vec<f64>) -> Self {
        SweepConfig {
            tau: vec![1.0],
            nu: vec![1.0],
            w_scale: vec![1.0],
            input_backoff_db,
            refine_drive: false,
            snr_db,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, axis) in [("tau", &self.tau), ("nu", &self.nu), ("w_scale", &self.w_scale)] {
            if axis.is_empty() || axis.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::param("sweep", format!("axis `{name}` needs positive values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param("sweep", format!("axis `{name}` must be strictly increasing")));
            }
        }
        for (name, axis) in [("tau", &self.tau), ("nu", &self.nu), ("w_scale", &self.w_scale)] {
            if axis.len() == 2 {
                return Err(Error::GridTooSmall {
                    axis: name_of(name),
                    len: 2,
                });
            }
        }
        if self.input_backoff_db.is_empty() || self.snr_db.is_empty() {
            return Err(Error::param("sweep", "drive and SNR lists must not be empty"));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.tau.len() * self.nu.len() * self.w_scale.len()
    }
}

fn name_of(name: &str) -> &'static str {
    match name {
        "tau" => "tau",
        "nu" => "nu",
        _ => "w_scale",
    }
}

/// One row of the spectral-efficiency surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub snr_db: f64,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub ibo_db: f64,
    pub obo_db: f64,
    pub n_i: f64,
    pub ir_bits: f64,
    pub hw95: f64,
    pub eta: f64,
    pub config_hash: String,
}

/// Best spectral efficiency at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMaximum {
    pub snr_db: f64,
    /// Interpolated maximum.
    pub eta_m: f64,
    /// Best measured grid value.
    pub eta_grid: f64,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub grid_tau: f64,
    pub grid_nu: f64,
    pub grid_w_scale: f64,
    pub obo_db: f64,
    pub n_i: f64,
    pub hw95: f64,
    /// Value at `(1, 1, 1)` when the grid contains that point.
    pub baseline_eta: Option<f64>,
    /// Grid maximum over the baseline, in percent.
    pub gain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub surface: Vec<SurfaceRow>,
    pub maxima: Vec<PackingMaximum>,
    /// Distinct grid argmax points across the SNR list.
    pub regions: usize,
}

/// Which coordinate of the grid an interpolation runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Tau,
    Nu,
    WScale,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Tau => "tau",
            Axis::Nu => "nu",
            Axis::WScale => "w_scale",
        }
    }
}

/// Parabolic refinement along one axis around index `best`. Returns the
/// refined coordinate and value, never below the grid value.
pub fn refine_axis(axis: Axis, coords: &[f64], values: &[f64], best: usize) -> Result<(f64, f64)> {
    match coords.len() {
        1 => return Ok((coords[0], values[0])),
        2 => {
            return Err(Error::GridTooSmall {
                axis: axis.name(),
                len: 2,
            })
        }
        _ => {}
    }
    let c = best.clamp(1, coords.len() - 2);
    let grid = (coords[best], values[best]);
    let xs = [coords[c - 1], coords[c], coords[c + 1]];
    let ys = [values[c - 1], values[c], values[c + 1]];
    match parabola_vertex(xs, ys) {
        Some((x, y)) if x >= xs[0] && x <= xs[2] && y > grid.1 => Ok((x, y)),
        _ => Ok(grid),
    }
}

fn best_by_snr(points: Vec<(f64, Vec<RatePoint>)>, n_snr: usize) -> Vec<(f64, RatePoint)> {
    (0..n_snr)
        .map(|s| {
            points
                .iter()
                .map(|(ibo, p)| (*ibo, p[s].clone()))
                .fold(None::<(f64, RatePoint)>, |best, cand| match best {
                    Some(b) if b.1.ir.bits_per_channel_use >= cand.1.ir.bits_per_channel_use => Some(b),
                    _ => Some(cand),
                })
                .expect("non-empty drive list")
        })
        .collect()
}

/// Coarse-grid search of `eta` over `(tau, nu, w_scale)` and the drive,
/// followed by separable parabolic interpolation around the grid argmax
/// for every SNR.
///
/// Every grid point uses the same seeds, so differences between points
/// are not blurred by independent Monte Carlo noise.
pub fn optimize_packing(
    base: &SystemConfig,
    det: &DetectorConfig,
    sweep: &SweepConfig,
    opts: &IrOptions,
    config_hash: &str,
) -> Result<PackingResult> {
    sweep.validate()?;
    let inner = IrOptions {
        exec: Exec::Sequential,
        ..opts.clone()
    };
    let mut luts: HashMap<(usize, usize, usize), PredistorterLut> = HashMap::new();
    if let DetectorConfig::Memoryless {
        predistortion: Some(pd),
        ..
    } = det
    {
        let keys: Vec<(usize, usize, usize)> = (0..sweep.tau.len())
            .flat_map(|t| (0..sweep.w_scale.len()).flat_map(move |w| (0..sweep.input_backoff_db.len()).map(move |d| (t, w, d))))
            .collect();
        let trained = opts.exec.try_map_range(keys.len(), |i| {
            let (t, w, d) = keys[i];
            let sys = base
                .at(sweep.tau[t], 1.0, sweep.w_scale[w])
                .with_backoff(sweep.input_backoff_db[d])
                .build()?;
            train_for(&sys, pd)
        })?;
        luts = keys.into_iter().zip(trained).collect();
    }
    let n_nu = sweep.nu.len();
    let n_w = sweep.w_scale.len();
    let n_snr = sweep.snr_db.len();
    let coords = |p: usize| (p / (n_nu * n_w), (p / n_w) % n_nu, p % n_w);
    let per_point = opts.exec.try_map_range(sweep.num_points(), |p| {
        let (t, n, w) = coords(p);
        let cfg = base.at(sweep.tau[t], sweep.nu[n], sweep.w_scale[w]);
        let run = |ibo: f64, lut: Option<PredistorterLut>, snrs: &[f64]| -> Result<Vec<RatePoint>> {
            let sys = cfg.with_backoff(ibo).build()?;
            let rx = prepare_receiver(&sys, det, lut, &inner)?;
            evaluate_point(&sys, &rx, snrs, &inner, config_hash)
        };
        let mut sweep_pts = Vec::new();
        for (d, &ibo) in sweep.input_backoff_db.iter().enumerate() {
            sweep_pts.push((ibo, run(ibo, luts.get(&(t, w, d)).cloned(), &sweep.snr_db)?));
        }
        let mut best = best_by_snr(sweep_pts.clone(), n_snr);
        if sweep.refine_drive && sweep.input_backoff_db.len() >= 3 {
            let ibos = &sweep.input_backoff_db;
            for (s, slot) in best.iter_mut().enumerate() {
                let vals: Vec<f64> = sweep_pts.iter().map(|(_, p)| p[s].ir.bits_per_channel_use).collect();
                let j = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
                let c = j.clamp(1, vals.len() - 2);
                let Some((x, _)) = parabola_vertex([ibos[c - 1], ibos[c], ibos[c + 1]], [vals[c - 1], vals[c], vals[c + 1]])
                else {
                    continue;
                };
                if x <= ibos[c - 1] || x >= ibos[c + 1] || ibos.iter().any(|v| (v - x).abs() < 1e-6) {
                    continue;
                }
                let pt = run(x, None, &sweep.snr_db[s..=s])?.remove(0);
                if pt.ir.bits_per_channel_use > slot.1.ir.bits_per_channel_use {
                    *slot = (x, pt);
                }
            }
        }
        best.into_iter()
            .map(|(ibo, pt)| {
                Ok(SurfaceRow {
                    snr_db: pt.snr_db,
                    tau: sweep.tau[t],
                    nu: sweep.nu[n],
                    w_scale: sweep.w_scale[w],
                    ibo_db: ibo,
                    obo_db: pt.obo_db,
                    n_i: pt.n_i,
                    ir_bits: pt.ir.bits_per_channel_use,
                    hw95: pt.ir.half_width_95,
                    eta: eta(pt.ir.bits_per_channel_use, sweep.tau[t], sweep.nu[n], base.t_b, base.f_b)?,
                    config_hash: config_hash.to_string(),
                })
            })
            .collect::<Result<Vec<SurfaceRow>>>()
    })?;

    let idx1 = |axis: &[f64]| axis.iter().position(|v| (v - 1.0).abs() < 1e-9);
    let base_p = match (idx1(&sweep.tau), idx1(&sweep.nu), idx1(&sweep.w_scale)) {
        (Some(t), Some(n), Some(w)) => Some((t * n_nu + n) * n_w + w),
        _ => None,
    };
    let mut maxima = Vec::with_capacity(n_snr);
    let mut argmaxes = Vec::new();
    for s in 0..n_snr {
        let eta_at = |p: usize| per_point[p][s].eta;
        let p_best = (0..per_point.len()).fold(0, |b, p| if eta_at(p) > eta_at(b) { p } else { b });
        argmaxes.push(p_best);
        let (t, n, w) = coords(p_best);
        let row = &per_point[p_best][s];
        let along_tau: Vec<f64> = (0..sweep.tau.len()).map(|i| eta_at((i * n_nu + n) * n_w + w)).collect();
        let along_nu: Vec<f64> = (0..n_nu).map(|i| eta_at((t * n_nu + i) * n_w + w)).collect();
        let along_w: Vec<f64> = (0..n_w).map(|i| eta_at((t * n_nu + n) * n_w + i)).collect();
        let (tau_f, e_t) = refine_axis(Axis::Tau, &sweep.tau, &along_tau, t)?;
        let (nu_f, e_n) = refine_axis(Axis::Nu, &sweep.nu, &along_nu, n)?;
        let (w_f, e_w) = refine_axis(Axis::WScale, &sweep.w_scale, &along_w, w)?;
        let eta_m = row.eta + (e_t - row.eta) + (e_n - row.eta) + (e_w - row.eta);
        let baseline = base_p.map(eta_at);
        maxima.push(PackingMaximum {
            snr_db: sweep.snr_db[s],
            eta_m,
            eta_grid: row.eta,
            tau: tau_f,
            nu: nu_f,
            w_scale: w_f,
            grid_tau: row.tau,
            grid_nu: row.nu,
            grid_w_scale: row.w_scale,
            obo_db: row.obo_db,
            n_i: row.n_i,
            hw95: row.hw95,
            baseline_eta: baseline,
            gain_pct: baseline.filter(|b| *b > 0.0).map(|b| 100.0 * (row.eta / b - 1.0)),
        });
    }
    argmaxes.sort_unstable();
    argmaxes.dedup();
    Ok(PackingResult {
        surface: per_point.into_iter().flatten().collect(),
        maxima,
        regions: argmaxes.len(),
    })
}
