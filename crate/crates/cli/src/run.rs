//! Running an experiment and writing its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::info;
use serde::Serialize;
use tfpack::coded::{ber_curve, BerPoint, ModCod};
use tfpack::inforate::{optimize_packing, PackingResult, SurfaceRow, SweepConfig};
use tfpack::Exec;

use crate::config::{task_system, ExperimentConfig, Task};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub full: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub profile: &'static str,
    pub versions: Versions,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub tfpack: &'static str,
    pub tfpack_cli: &'static str,
    pub parallel: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub digest: String,
}

/// Row of `curves.csv`: one per task and SNR.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub task: String,
    pub label: String,
    pub constellation: String,
    pub detector: String,
    pub snr_db: f64,
    pub eta: f64,
    pub eta_grid: f64,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub ibo_db: Option<f64>,
    pub obo_db: f64,
    pub n_i: f64,
    pub ir_bits: f64,
    pub hw95: f64,
    pub gain_pct: Option<f64>,
    pub config_hash: String,
}

/// Row of `surface.csv`.
#[derive(Debug, Clone, Serialize)]
struct LabelledSurfaceRow<'a> {
    label: &'a str,
    snr_db: f64,
    tau: f64,
    nu: f64,
    w_scale: f64,
    ibo_db: f64,
    obo_db: f64,
    n_i: f64,
    ir_bits: f64,
    hw95: f64,
    eta: f64,
    config_hash: &'a str,
}

impl<'a> LabelledSurfaceRow<'a> {
    fn new(label: &'a str, r: &'a SurfaceRow) -> Self {
        LabelledSurfaceRow {
            label,
            snr_db: r.snr_db,
            tau: r.tau,
            nu: r.nu,
            w_scale: r.w_scale,
            ibo_db: r.ibo_db,
            obo_db: r.obo_db,
            n_i: r.n_i,
            ir_bits: r.ir_bits,
            hw95: r.hw95,
            eta: r.eta,
            config_hash: &r.config_hash,
        }
    }
}

/// Row of `ber.csv`.
#[derive(Debug, Clone, Serialize)]
struct LabelledBerRow<'a> {
    label: &'a str,
    modcod: &'a str,
    snr_db: f64,
    ber: f64,
    ci_low: f64,
    ci_high: f64,
    trials: usize,
    bits: usize,
    bit_errors: usize,
    frame_errors: usize,
    mean_global_iterations: f64,
    config_hash: &'a str,
}

impl<'a> LabelledBerRow<'a> {
    fn new(label: &'a str, modcod: &'a str, p: &'a BerPoint) -> Self {
        LabelledBerRow {
            label,
            modcod,
            snr_db: p.snr_db,
            ber: p.ber,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            trials: p.trials,
            bits: p.bits,
            bit_errors: p.bit_errors,
            frame_errors: p.frame_errors,
            mean_global_iterations: p.mean_global_iterations,
            config_hash: &p.config_hash,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModcodRow {
    pub label: String,
    pub modcod: String,
    pub constellation: String,
    pub rate: String,
    pub tau: f64,
    pub nu: f64,
    pub w_scale: f64,
    pub snr_db: f64,
    pub eta_table: Option<f64>,
    pub eta: f64,
    pub abs_error: Option<f64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct MaximaEntry<'a> {
    label: &'a str,
    constellation: String,
    detector: String,
    regions: usize,
    maxima: &'a [tfpack::inforate::PackingMaximum],
}

#[derive(Debug, Clone, Serialize)]
struct MaximaFile<'a> {
    scenario: &'a str,
    config_hash: &'a str,
    tasks: Vec<MaximaEntry<'a>>,
}

#[derive(Default)]
struct Collected {
    curves: Vec<CurveRow>,
    surface: Vec<(String, SurfaceRow)>,
    maxima: Vec<(String, String, String, PackingResult)>,
    ber: Vec<(String, String, BerPoint)>,
    modcods: Vec<ModcodRow>,
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

fn detector_name(det: &tfpack::inforate::DetectorConfig) -> String {
    use tfpack::inforate::DetectorConfig as D;
    match det {
        D::Memoryless { predistortion: None, .. } => "memoryless".into(),
        D::Memoryless {
            predistortion: Some(p), ..
        } => format!("memoryless+pd{}", p.lp),
        D::Shortened { memory, .. } => format!("cs{memory}"),
    }
}

/// Load, validate and run the experiment at `path`. Outputs are written to a
/// staging directory next to the destination and moved into place only when
/// every task succeeded.
pub fn run_experiment(path: &Path, opts: &RunOptions) -> anyhow::Result<RunSummary> {
    let cfg = ExperimentConfig::load(path)?.resolved(opts.full, opts.seed);
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.scenario));
    let (symbols, codewords) = cfg.workload();
    if symbols > cfg.limits.max_symbols {
        bail!("resource cap exceeded: {symbols:.3e} simulated symbols > limits.max_symbols = {:.3e}", cfg.limits.max_symbols);
    }
    if codewords > cfg.limits.max_codewords {
        bail!("resource cap exceeded: {codewords} codewords > limits.max_codewords = {}", cfg.limits.max_codewords);
    }
    check_destination(&out_dir)?;

    let hash = cfg.hash();
    info!("scenario {} (config {hash}), output {}", cfg.scenario, out_dir.display());
    let threads = cfg.threads;
    let collected = tfpack::exec::with_threads(threads, || execute(&cfg, &hash))?;

    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let stage = tempfile::Builder::new()
        .prefix(".tfpack-stage-")
        .tempdir_in(&parent)
        .context("creating staging directory")?;
    let files = write_outputs(stage.path(), &cfg, &hash, &collected)?;
    let manifest = Manifest {
        scenario: cfg.scenario.clone(),
        config_hash: hash.clone(),
        seed: cfg.seed,
        profile: if opts.full { "full" } else { "desk" },
        versions: Versions {
            tfpack: tfpack::VERSION,
            tfpack_cli: env!("CARGO_PKG_VERSION"),
            parallel: Exec::Parallel.is_parallel(),
        },
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(stage.path().join("manifest.json"), text)?;
    fs::write(stage.path().join("config.resolved.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;

    if out_dir.exists() {
        fs::remove_dir_all(&out_dir).with_context(|| format!("replacing {}", out_dir.display()))?;
    }
    let staged = stage.keep();
    fs::rename(&staged, &out_dir).with_context(|| format!("moving results to {}", out_dir.display()))?;
    Ok(RunSummary { out_dir, manifest })
}

/// An existing destination is replaced only if it holds a previous run.
fn check_destination(out: &Path) -> anyhow::Result<()> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() {
        bail!("output path {} exists and is not a directory", out.display());
    }
    let empty = fs::read_dir(out)?.next().is_none();
    if !empty && !out.join("manifest.json").exists() {
        bail!("output directory {} is not empty and holds no previous run", out.display());
    }
    Ok(())
}

fn execute(cfg: &ExperimentConfig, hash: &str) -> anyhow::Result<Collected> {
    let mut out = Collected::default();
    let opts = tfpack::inforate::IrOptions {
        exec: Exec::Parallel,
        ..cfg.estimation.clone()
    };
    let fb_tb = cfg.system.f_b * cfg.system.t_b;
    for task in &cfg.tasks {
        let label = task.label().to_string();
        info!("task {label} ({})", task.kind());
        match task {
            Task::Curves {
                constellation,
                system,
                detector,
                tau,
                nu,
                w_scale,
                input_backoff_db,
                snr_db,
                refine_drive,
                ..
            } => {
                let base = task_system(&cfg.system, *constellation, system.as_ref())?;
                let sweep = SweepConfig {
                    tau: vec![*tau],
                    nu: vec![*nu],
                    w_scale: vec![*w_scale],
                    input_backoff_db: input_backoff_db.clone(),
                    refine_drive: *refine_drive,
                    snr_db: snr_db.clone(),
                };
                let res = optimize_packing(&base, detector, &sweep, &opts, hash).with_context(|| format!("task {label}"))?;
                out.curves
                    .extend(curve_rows("curves", &label, &constellation.to_string(), &detector_name(detector), &res, base.f_b * base.t_b, hash));
                out.surface.extend(res.surface.iter().map(|r| (label.clone(), r.clone())));
            }
            Task::Packing {
                constellation,
                system,
                detector,
                sweep,
                ..
            } => {
                let base = task_system(&cfg.system, *constellation, system.as_ref())?;
                let res = optimize_packing(&base, detector, sweep, &opts, hash).with_context(|| format!("task {label}"))?;
                let det = detector_name(detector);
                out.curves
                    .extend(curve_rows("packing", &label, &constellation.to_string(), &det, &res, base.f_b * base.t_b, hash));
                out.surface.extend(res.surface.iter().map(|r| (label.clone(), r.clone())));
                out.maxima.push((label.clone(), constellation.to_string(), det, res));
            }
            Task::Coded {
                modcod, system, coded, ..
            } => {
                let base = task_system(&cfg.system, modcod.constellation, system.as_ref())?;
                let points = ber_curve(&base, modcod, coded, &opts, hash).with_context(|| format!("task {label}"))?;
                out.ber
                    .extend(points.into_iter().map(|p| (label.clone(), modcod.name(), p)));
            }
            Task::ModcodTable { rows, .. } => {
                out.modcods.extend(rows.iter().map(|m| modcod_row(&label, m, fb_tb, hash)));
            }
        }
    }
    Ok(out)
}

fn curve_rows(
    task: &str,
    label: &str,
    constellation: &str,
    detector: &str,
    res: &PackingResult,
    fb_tb: f64,
    hash: &str,
) -> Vec<CurveRow> {
    res.maxima
        .iter()
        .map(|m| {
            let ibo = res
                .surface
                .iter()
                .find(|r| {
                    r.snr_db == m.snr_db
                        && r.tau == m.grid_tau
                        && r.nu == m.grid_nu
                        && r.w_scale == m.grid_w_scale
                        && r.eta == m.eta_grid
                })
                .map(|r| r.ibo_db);
            CurveRow {
                task: task.to_string(),
                label: label.to_string(),
                constellation: constellation.to_string(),
                detector: detector.to_string(),
                snr_db: m.snr_db,
                eta: m.eta_m,
                eta_grid: m.eta_grid,
                tau: m.tau,
                nu: m.nu,
                w_scale: m.w_scale,
                ibo_db: ibo,
                obo_db: m.obo_db,
                n_i: m.n_i,
                ir_bits: m.eta_grid * m.grid_tau * m.grid_nu * fb_tb,
                hw95: m.hw95,
                gain_pct: m.gain_pct,
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

fn modcod_row(label: &str, m: &ModCod, fb_tb: f64, hash: &str) -> ModcodRow {
    let eta = m.spectral_efficiency(fb_tb);
    ModcodRow {
        label: label.to_string(),
        modcod: m.name(),
        constellation: m.constellation.to_string(),
        rate: m.rate.to_string(),
        tau: m.tau,
        nu: m.nu,
        w_scale: m.w_scale,
        snr_db: m.snr_db,
        eta_table: m.eta,
        eta,
        abs_error: m.eta.map(|t| (t - eta).abs()),
        config_hash: hash.to_string(),
    }
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<FileEntry> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut count = 0;
    for r in rows {
        w.serialize(r)?;
        count += 1;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    fs::write(dir.join(name), &bytes)?;
    Ok(FileEntry {
        name: name.to_string(),
        rows: count,
        digest: tfpack::seed::config_hash(&String::from_utf8_lossy(&bytes)),
    })
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, hash: &str, c: &Collected) -> anyhow::Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    if !c.curves.is_empty() {
        files.push(write_csv(dir, "curves.csv", &c.curves)?);
    }
    if !c.surface.is_empty() {
        files.push(write_csv(
            dir,
            "surface.csv",
            c.surface.iter().map(|(label, row)| LabelledSurfaceRow::new(label, row)),
        )?);
    }
    if !c.maxima.is_empty() {
        let doc = MaximaFile {
            scenario: &cfg.scenario,
            config_hash: hash,
            tasks: c
                .maxima
                .iter()
                .map(|(label, constellation, detector, res)| MaximaEntry {
                    label,
                    constellation: constellation.clone(),
                    detector: detector.clone(),
                    regions: res.regions,
                    maxima: &res.maxima,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        fs::write(dir.join("maxima.json"), &text)?;
        files.push(FileEntry {
            name: "maxima.json".into(),
            rows: c.maxima.iter().map(|m| m.3.maxima.len()).sum(),
            digest: tfpack::seed::config_hash(&text),
        });
    }
    if !c.ber.is_empty() {
        files.push(write_csv(
            dir,
            "ber.csv",
            c.ber.iter().map(|(label, modcod, point)| LabelledBerRow::new(label, modcod, point)),
        )?);
    }
    if !c.modcods.is_empty() {
        files.push(write_csv(dir, "modcods.csv", &c.modcods)?);
    }
    Ok(files)
}
