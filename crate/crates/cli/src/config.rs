//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tfpack::coded::{BerLimits, CodedConfig, ModCod};
use tfpack::inforate::{DetectorConfig, IrOptions, SweepConfig, SystemConfig};
use tfpack::waveform::ConstellationLabel;

/// A complete, reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Base system shared by every task; tasks may override fields.
    #[serde(default)]
    pub system: SystemConfig,
    /// Monte Carlo size of the desk profile.
    #[serde(default)]
    pub estimation: IrOptions,
    /// Settings that replace the desk ones under `--full`.
    #[serde(default)]
    pub full: FullProfile,
    #[serde(default)]
    pub limits: ResourceLimits,
    /// Relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker pool size; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    pub tasks: Vec<Task>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FullProfile {
    pub estimation: IrOptions,
    pub ber_limits: BerLimits,
}

impl Default for FullProfile {
    fn default() -> Self {
        FullProfile {
            estimation: IrOptions {
                blocks: 100,
                block_len: 500,
                training_blocks: 8,
                ..IrOptions::default()
            },
            ber_limits: BerLimits {
                min_frame_errors: 50,
                max_codewords: 5000,
                batch: 16,
            },
        }
    }
}

/// Caps checked before any simulation starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceLimits {
    /// Upper bound on Monte Carlo symbols summed over all rate evaluations.
    pub max_symbols: f64,
    /// Upper bound on decoded codewords summed over all BER points.
    pub max_codewords: usize,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            max_symbols: 1e10,
            max_codewords: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Spectral efficiency versus SNR at a fixed `(tau, nu, w_scale)`, best
    /// drive per SNR.
    Curves {
        label: String,
        constellation: ConstellationLabel,
        #[serde(default)]
        system: Option<Value>,
        detector: DetectorConfig,
        #[serde(default = "one")]
        tau: f64,
        #[serde(default = "one")]
        nu: f64,
        #[serde(default = "one")]
        w_scale: f64,
        input_backoff_db: Vec<f64>,
        snr_db: Vec<f64>,
        #[serde(default)]
        refine_drive: bool,
    },
    /// Surface over the packing grid and its per-SNR maxima.
    Packing {
        label: String,
        constellation: ConstellationLabel,
        #[serde(default)]
        system: Option<Value>,
        detector: DetectorConfig,
        #[serde(default)]
        sweep: SweepConfig,
    },
    /// Coded BER curve of one MODCOD.
    Coded {
        label: String,
        modcod: ModCod,
        #[serde(default)]
        system: Option<Value>,
        coded: CodedConfig,
    },
    /// Spectral efficiency check of tabulated MODCOD rows.
    ModcodTable {
        label: String,
        /// JSON array of rows, relative to the config file.
        #[serde(default)]
        file: Option<PathBuf>,
        #[serde(default)]
        rows: Vec<ModCod>,
    },
}

fn one() -> f64 {
    1.0
}

impl Task {
    pub fn label(&self) -> &str {
        match self {
            Task::Curves { label, .. }
            | Task::Packing { label, .. }
            | Task::Coded { label, .. }
            | Task::ModcodTable { label, .. } => label,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Task::Curves { .. } => "curves",
            Task::Packing { .. } => "packing",
            Task::Coded { .. } => "coded",
            Task::ModcodTable { .. } => "modcod_table",
        }
    }
}

/// Base system with a task's JSON overrides merged in.
pub fn task_system(base: &SystemConfig, constellation: ConstellationLabel, patch: Option<&Value>) -> anyhow::Result<SystemConfig> {
    let mut value = serde_json::to_value(SystemConfig {
        constellation,
        ..base.clone()
    })?;
    if let Some(p) = patch {
        merge(&mut value, p);
    }
    serde_json::from_value(value).context("task system override")
}

fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, p) => *t = p.clone(),
    }
}

impl ExperimentConfig {
    /// Parse and check a config file. Rows referenced by `modcod_table`
    /// tasks are inlined, so the returned config is self-contained.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            anyhow::anyhow!("{}:{}:{}: {}", path.display(), e.line(), e.column(), e)
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for task in &mut cfg.tasks {
            if let Task::ModcodTable { file, rows, .. } = task {
                if let Some(f) = file.take() {
                    let p = dir.join(f);
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    let extra: Vec<ModCod> = serde_json::from_str(&text)
                        .map_err(|e| anyhow::anyhow!("{}:{}:{}: {}", p.display(), e.line(), e.column(), e))?;
                    rows.extend(extra);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.scenario.trim().is_empty() {
            bail!("scenario: name must not be empty");
        }
        if self.tasks.is_empty() {
            bail!("tasks: at least one task is required");
        }
        if self.threads == Some(0) {
            bail!("threads: must be at least 1");
        }
        let mut labels = HashSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            let at = format!("tasks[{i}] ({})", t.label());
            if t.label().trim().is_empty() {
                bail!("tasks[{i}]: label must not be empty");
            }
            if !labels.insert(t.label()) {
                bail!("{at}: duplicate label");
            }
            match t {
                Task::Curves {
                    constellation,
                    system,
                    input_backoff_db,
                    snr_db,
                    tau,
                    nu,
                    w_scale,
                    ..
                } => {
                    task_system(&self.system, *constellation, system.as_ref()).with_context(|| at.clone())?;
                    if input_backoff_db.is_empty() || snr_db.is_empty() {
                        bail!("{at}: input_backoff_db and snr_db must not be empty");
                    }
                    if !(*tau > 0.0 && *nu > 0.0 && *w_scale > 0.0) {
                        bail!("{at}: tau, nu and w_scale must be positive");
                    }
                }
                Task::Packing {
                    constellation, system, sweep, ..
                } => {
                    task_system(&self.system, *constellation, system.as_ref()).with_context(|| at.clone())?;
                    for (name, axis) in [("tau", &sweep.tau), ("nu", &sweep.nu), ("w_scale", &sweep.w_scale)] {
                        if axis.len() == 2 {
                            bail!("{at}: sweep.{name} has 2 points; interpolation needs 1 or at least 3");
                        }
                        if axis.is_empty() || axis.windows(2).any(|w| w[1] <= w[0]) {
                            bail!("{at}: sweep.{name} must be non-empty and strictly increasing");
                        }
                    }
                    if sweep.input_backoff_db.is_empty() || sweep.snr_db.is_empty() {
                        bail!("{at}: sweep.input_backoff_db and sweep.snr_db must not be empty");
                    }
                }
                Task::Coded {
                    modcod, system, coded, ..
                } => {
                    task_system(&self.system, modcod.constellation, system.as_ref()).with_context(|| at.clone())?;
                    modcod.validate().with_context(|| at.clone())?;
                    coded.schedule.validate().with_context(|| at.clone())?;
                    if coded.snr_db.is_empty() {
                        bail!("{at}: coded.snr_db must not be empty");
                    }
                }
                Task::ModcodTable { rows, .. } => {
                    if rows.is_empty() {
                        bail!("{at}: no MODCOD rows");
                    }
                    for r in rows {
                        r.validate().with_context(|| at.clone())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply the `--full` profile and a seed override.
    pub fn resolved(mut self, full: bool, seed: Option<u64>) -> Self {
        if full {
            self.estimation = self.full.estimation.clone();
            for t in &mut self.tasks {
                if let Task::Coded { coded, .. } = t {
                    coded.limits = self.full.ber_limits;
                }
            }
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self.estimation.seed = self.seed;
        self
    }

    /// Digest of everything that influences the results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        canonical.threads = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        tfpack::seed::config_hash(&text)
    }

    /// Rough number of simulated symbols and decoded codewords.
    pub fn workload(&self) -> (f64, usize) {
        let per_eval = (self.estimation.blocks + self.estimation.training_blocks) as f64 * self.estimation.block_len as f64;
        let mut symbols = 0.0;
        let mut codewords = 0;
        for t in &self.tasks {
            match t {
                Task::Curves { input_backoff_db, .. } => symbols += per_eval * input_backoff_db.len() as f64,
                Task::Packing { sweep, .. } => {
                    symbols += per_eval * (sweep.num_points() * sweep.input_backoff_db.len()) as f64
                }
                Task::Coded { coded, .. } => codewords += coded.limits.max_codewords * coded.snr_db.len(),
                Task::ModcodTable { .. } => {}
            }
        }
        (symbols, codewords)
    }
}
