//! Spectral efficiency gains between two runs at matched SNR.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

/// One curve point read from a results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub label: String,
    pub snr_db: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub label: String,
    pub snr_db: f64,
    pub baseline_eta: f64,
    pub candidate_eta: f64,
    pub gain_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    /// Per-curve gains; empty in envelope mode.
    pub rows: Vec<GainRow>,
    /// Gain of the best curve of each run, per SNR.
    pub envelope: Vec<GainRow>,
}

impl CompareReport {
    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.rows.iter().chain(&self.envelope) {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn snr_key(snr: f64) -> i64 {
    (snr * 1e6).round() as i64
}

pub fn gain_pct(baseline: f64, candidate: f64) -> f64 {
    100.0 * (candidate / baseline - 1.0)
}

/// Read `(label, snr_db, eta)` from any CSV with `snr_db` and `eta` columns.
/// A missing `label` column puts every row on one curve.
pub fn read_curves(path: &Path) -> anyhow::Result<Vec<CurvePoint>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let snr = col("snr_db").with_context(|| format!("{}: no `snr_db` column", path.display()))?;
    let eta = col("eta").with_context(|| format!("{}: no `eta` column", path.display()))?;
    let label = col("label");
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize, name: &str| -> anyhow::Result<f64> {
            rec.get(c)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}: bad `{name}`", path.display(), i + 2))
        };
        points.push(CurvePoint {
            label: label.and_then(|c| rec.get(c)).unwrap_or("").to_string(),
            snr_db: num(snr, "snr_db")?,
            eta: num(eta, "eta")?,
        });
    }
    if points.is_empty() {
        bail!("{}: no rows", path.display());
    }
    Ok(points)
}

type Curves = BTreeMap<String, BTreeMap<i64, (f64, f64)>>;

/// Per curve and SNR, the largest efficiency in the file.
fn group(points: &[CurvePoint]) -> Curves {
    let mut out: Curves = BTreeMap::new();
    for p in points {
        let e = out
            .entry(p.label.clone())
            .or_default()
            .entry(snr_key(p.snr_db))
            .or_insert((p.snr_db, p.eta));
        if p.eta > e.1 {
            e.1 = p.eta;
        }
    }
    out
}

fn envelope(curves: &Curves) -> BTreeMap<i64, (f64, f64)> {
    let mut out: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for c in curves.values() {
        for (&k, &(snr, eta)) in c {
            let e = out.entry(k).or_insert((snr, eta));
            if eta > e.1 {
                e.1 = eta;
            }
        }
    }
    out
}

fn matched(label: &str, a: &BTreeMap<i64, (f64, f64)>, b: &BTreeMap<i64, (f64, f64)>) -> Vec<GainRow> {
    a.iter()
        .filter_map(|(k, &(snr, base))| {
            b.get(k).map(|&(_, cand)| GainRow {
                label: label.to_string(),
                snr_db: snr,
                baseline_eta: base,
                candidate_eta: cand,
                gain_pct: gain_pct(base, cand),
            })
        })
        .collect()
}

/// Gains of `candidate` over `baseline`. Curves are matched by label, or
/// paired directly when each side holds a single curve.
pub fn compare_points(baseline: &[CurvePoint], candidate: &[CurvePoint], envelope_only: bool) -> anyhow::Result<CompareReport> {
    let a = group(baseline);
    let b = group(candidate);
    let env = matched("envelope", &envelope(&a), &envelope(&b));
    if env.is_empty() {
        return Err(tfpack::Error::DisjointSnrGrids.into());
    }
    let mut rows = Vec::new();
    if !envelope_only {
        if a.len() == 1 && b.len() == 1 {
            let (la, ca) = a.iter().next().expect("one curve");
            let (lb, cb) = b.iter().next().expect("one curve");
            let label = if la == lb { la.clone() } else { format!("{lb} vs {la}") };
            rows = matched(&label, ca, cb);
        } else {
            let common: BTreeSet<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
            if common.is_empty() {
                bail!("the runs share no curve labels; use --envelope");
            }
            for l in common {
                rows.extend(matched(l, &a[l], &b[l]));
            }
        }
    }
    Ok(CompareReport { rows, envelope: env })
}

pub fn compare_runs(baseline: &Path, candidate: &Path, envelope_only: bool) -> anyhow::Result<CompareReport> {
    compare_points(&read_curves(baseline)?, &read_curves(candidate)?, envelope_only)
}
