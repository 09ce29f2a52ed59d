//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Slow by design (around a quarter of an hour on one core).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use tfpack::coded::{ber_curve, BerLimits, CodedConfig, ModCod};
use tfpack::detect::{bcjr_detect, channel_shortening_optimize, ungerboeck_log_likelihood, UngerboeckSpec};
use tfpack::dsp::log_sum_exp;
use tfpack::inforate::{
    estimate_ir, evaluate_point, n0_for_es_n0, optimize_packing, prepare_receiver, DetectorConfig, IrOptions,
    SweepConfig, SystemConfig,
};
use tfpack::predistort::{center_samples, train_predistorter, PredistorterLut, TrainOptions};
use tfpack::seed;
use tfpack::volterra::{GramSequence, StatBlock};
use tfpack::waveform::{build_constellation, Constellation, ConstellationLabel, DVBS2_FB_TB};
use tfpack::C64;
use tfpack_cli::{run_experiment, RunOptions};

type Outcome = Result<String, String>;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table_arithmetic() -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut rows = 0;
    for file in ["tfpack.json", "dvbs2.json"] {
        let text = fs::read_to_string(repo().join("scenarios/modcods").join(file)).map_err(|e| e.to_string())?;
        let table: Vec<ModCod> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for m in &table {
            let printed = m.eta.ok_or_else(|| format!("{} has no printed eta", m.name()))?;
            let err = (m.spectral_efficiency(DVBS2_FB_TB) - printed).abs();
            if err >= worst.0 {
                worst = (err, format!("{file}: {}", m.name()));
            }
            rows += 1;
        }
    }
    check(
        rows == 27 && worst.0 <= 0.01,
        format!("{rows} rows, largest |eta - printed| = {:.4} ({})", worst.0, worst.1),
    )
}

fn random_spec(rng: &mut seed::Rng, lr: usize) -> UngerboeckSpec {
    let mut c = || C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let h = (0..3).map(|_| vec![c()]).collect();
    let mut gr: Vec<Vec<C64>> = (0..=lr).map(|_| vec![c() * 0.5]).collect();
    gr[0][0] = C64::new(gr[0][0].re.abs() + 0.5, 0.0);
    UngerboeckSpec { dim: 1, h, gr }
}

fn sequences(k_len: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..m.pow(k_len as u32)).map(move |mut n| {
        (0..k_len)
            .map(|_| {
                let d = n % m;
                n /= m;
                d
            })
            .collect()
    })
}

fn bcjr_oracle() -> Outcome {
    let qpsk = build_constellation(ConstellationLabel::Qpsk, None).map_err(|e| e.to_string())?;
    let mut bpsk = qpsk.clone();
    bpsk.points = vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
    let mut rng = seed::stream(2024, &[]);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let (m, c): (usize, &Constellation) = if i % 2 == 0 { (2, &bpsk) } else { (4, &qpsk) };
        let lr = (i / 2) % 3;
        let k_len = rng.random_range(1..=if m == 4 { 7 } else { 8 });
        let aux = random_spec(&mut rng, lr);
        let y = StatBlock::from_scalars(
            (0..k_len)
                .map(|_| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect(),
        );
        let out = bcjr_detect(&y, &aux, c, None, None).map_err(|e| e.to_string())?;
        let all: Vec<f64> = sequences(k_len, m)
            .map(|x| ungerboeck_log_likelihood(&y, &aux, c, &x) - k_len as f64 * (m as f64).ln())
            .collect();
        worst = worst.max((out.log_py - log_sum_exp(&all)).abs());
    }
    check(worst < 1e-9, format!("200 instances, max |log p(y) - enumeration| = {worst:.2e}"))
}

/// Binary-input AWGN mutual information per real dimension, by quadrature.
fn bpsk_mi(amplitude: f64, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let n = 8000;
    let (lo, hi) = (-12.0, 12.0);
    let dz = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let z = lo + i as f64 * dz;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let llr = 2.0 * amplitude * (amplitude + sigma * z) / sigma2;
        let soft = if llr > 30.0 { (-llr).exp() } else { (-llr).exp().ln_1p() };
        acc += w * pdf * soft;
    }
    1.0 - acc * dz / std::f64::consts::LN_2
}

fn linear_calibration() -> Outcome {
    let sys = SystemConfig::linear(ConstellationLabel::Qpsk).build().map_err(|e| e.to_string())?;
    let opts = IrOptions {
        blocks: 200,
        block_len: 500,
        ..IrOptions::default()
    };
    let rx = prepare_receiver(&sys, &DetectorConfig::memoryless(), None, &opts).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for es_n0 in [0.0, 5.0, 10.0] {
        let n0 = n0_for_es_n0(es_n0);
        let aux = rx.aux_with(n0, 0.0).map_err(|e| e.to_string())?;
        let ir = estimate_ir(&sys, &rx, &aux, n0, &opts, "").map_err(|e| e.to_string())?;
        let oracle = 2.0 * bpsk_mi(0.5f64.sqrt(), n0);
        let err = (ir.bits_per_channel_use - oracle).abs();
        ok &= err <= ir.half_width_95.max(0.02);
        parts.push(format!(
            "{es_n0} dB: {:.4} vs {oracle:.4} (hw {:.4})",
            ir.bits_per_channel_use, ir.half_width_95
        ));
    }
    check(ok, format!("K = 1e5; {}", parts.join("; ")))
}

/// Gram sequence `g_l = sum_j P_j^H P_{j+l}` of a random block pulse.
fn random_gram(rng: &mut seed::Rng, dim: usize, taps: usize) -> GramSequence {
    let p: Vec<DMatrix<C64>> = (0..taps)
        .map(|j| {
            let scale = 1.0 / (1.0 + j as f64);
            DMatrix::from_fn(dim, dim, |r, c| {
                let diag = if r == c && j == 0 { 1.0 } else { 0.0 };
                C64::new(diag + scale * rng.random_range(-0.4..0.4), scale * rng.random_range(-0.4..0.4))
            })
        })
        .collect();
    let lags: Vec<Vec<C64>> = (0..taps)
        .map(|l| {
            let g = (0..taps - l).fold(DMatrix::zeros(dim, dim), |acc, j| acc + p[j].adjoint() * &p[j + l]);
            let mut row = Vec::with_capacity(dim * dim);
            for r in 0..dim {
                for c in 0..dim {
                    row.push(g[(r, c)]);
                }
            }
            row
        })
        .collect();
    let mut eye = vec![C64::new(0.0, 0.0); dim * dim];
    (0..dim).for_each(|i| eye[i * dim + i] = C64::new(1.0, 0.0));
    GramSequence {
        dim,
        memory: taps - 1,
        lags,
        feature_cov: eye,
    }
}

fn max_dev(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn cs_special_cases() -> Outcome {
    let mut rng = seed::stream(77, &[]);
    let (mut trivial, mut mmse) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for dim in [1, 2] {
        for trial in 0..4 {
            let g = random_gram(&mut rng, dim, 3);
            let n0 = [0.02, 0.05, 0.1, 0.3][trial];
            let s2 = 2.0 * n0;
            for lr in [g.memory, g.memory + 1] {
                let aux = channel_shortening_optimize(&g, n0, lr).map_err(|e| e.to_string())?;
                let eye = DMatrix::<C64>::identity(dim, dim) / C64::new(s2, 0.0);
                trivial = trivial.max(max_dev(&aux.h_block(0), &eye));
                for l in 1..=aux.h_max() as isize {
                    trivial = trivial.max(aux.h_block(l).iter().map(|v| v.norm()).fold(0.0, f64::max));
                }
                for l in 0..=lr as isize {
                    trivial = trivial.max(max_dev(&aux.gr_block(l), &(g.block(l) / C64::new(s2, 0.0))));
                }
            }
            let n = 201;
            let mid = n / 2;
            let a = g.toeplitz(n) + DMatrix::identity(n * dim, n * dim) * C64::new(s2, 0.0);
            let inv = a.try_inverse().ok_or("singular Toeplitz section")?;
            let w0 = inv.view((mid * dim, mid * dim), (dim, dim)).into_owned();
            let w0_inv = w0.clone().try_inverse().ok_or("singular centre block")?;
            let aux = channel_shortening_optimize(&g, n0, 0).map_err(|e| e.to_string())?;
            let g0 = &w0_inv / C64::new(s2, 0.0) - DMatrix::identity(dim, dim);
            mmse = mmse.max(max_dev(&aux.gr_block(0), &g0));
            for l in -20isize..=20 {
                let col = inv.view(((mid as isize + l) as usize * dim, mid * dim), (dim, dim)).into_owned();
                mmse = mmse.max(max_dev(&aux.h_block(l), &(col * &w0_inv / C64::new(s2, 0.0))));
            }
            cases += 1;
        }
    }
    check(
        trivial < 1e-9 && mmse < 1e-6,
        format!("{cases} sequences (dim 1 and 2); L_r >= memory dev {trivial:.2e}, L_r = 0 vs MMSE dev {mmse:.2e}"),
    )
}

fn ordering() -> Outcome {
    let base = SystemConfig::default().at(0.75, 0.9, 1.0).with_backoff(3.0);
    let sys = base.build().map_err(|e| e.to_string())?;
    let opts = IrOptions {
        blocks: 100,
        block_len: 500,
        ..IrOptions::default()
    };
    let snrs = [5.0, 10.0, 15.0];
    let dets = [DetectorConfig::memoryless(), DetectorConfig::shortened(0), DetectorConfig::shortened(1)];
    let mut curves = Vec::new();
    for det in &dets {
        let rx = prepare_receiver(&sys, det, None, &opts).map_err(|e| e.to_string())?;
        curves.push(evaluate_point(&sys, &rx, &snrs, &opts, "").map_err(|e| e.to_string())?);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, snr) in snrs.iter().enumerate() {
        let v: Vec<(f64, f64)> = curves
            .iter()
            .map(|c| (c[i].ir.bits_per_channel_use, c[i].ir.half_width_95))
            .collect();
        for w in v.windows(2) {
            ok &= w[1].0 - w[0].0 >= -(w[0].1 + w[1].1);
        }
        parts.push(format!("{snr} dB: {:.3} <= {:.3} <= {:.3} (hw {:.3})", v[0].0, v[1].0, v[2].0, v[2].1));
    }
    check(ok, format!("QPSK tau 0.75 nu 0.9, K = 5e4; {}", parts.join("; ")))
}

fn packing_gain() -> Outcome {
    let sweep = SweepConfig {
        input_backoff_db: vec![1.5, 3.0, 4.5],
        ..SweepConfig::default()
    };
    let opts = IrOptions::default();
    let res = optimize_packing(&SystemConfig::default(), &DetectorConfig::shortened(1), &sweep, &opts, "")
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in res.maxima.iter().rev().take(2) {
        let base = m.baseline_eta.ok_or("grid lacks (1, 1, 1)")?;
        let gain = 100.0 * (m.eta_m / base - 1.0);
        ok &= gain >= 15.0;
        parts.push(format!(
            "{} dB: eta_M {:.3} at ({:.3}, {:.3}, {:.3}) vs {:.3}, +{gain:.1}%",
            m.snr_db, m.eta_m, m.tau, m.nu, m.w_scale, base
        ));
    }
    check(ok, format!("{} grid points x 3 drives; {}", sweep.num_points(), parts.join("; ")))
}

fn predistorter_efficacy() -> Outcome {
    let sys = SystemConfig::default().with_backoff(3.0).build().map_err(|e| e.to_string())?;
    let one = sys.single_carrier().map_err(|e| e.to_string())?;
    let train = TrainOptions::default();
    let (lut, _) =
        train_predistorter(&one.spec, &one.pulse, &one.constellation, 2, &train).map_err(|e| e.to_string())?;
    let diffs: Vec<f64> = (0..40u64)
        .map(|b| {
            let idx = one.constellation.random_indices(&mut seed::stream(0xbeef, &[b]), 2048);
            let plain = center_samples(&one.spec, &one.pulse, &one.constellation, None, &idx)?.mse();
            let pd = center_samples(&one.spec, &one.pulse, &one.constellation, Some(&lut), &idx)?.mse();
            Ok(plain - pd)
        })
        .collect::<tfpack::Result<_>>()
        .map_err(|e| e.to_string())?;
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let lower = mean - 1.96 * sd / n.sqrt();

    let lin = SystemConfig::linear(ConstellationLabel::Qpsk).build().map_err(|e| e.to_string())?;
    let (lin_lut, _) =
        train_predistorter(&lin.spec, &lin.pulse, &lin.constellation, 2, &train).map_err(|e| e.to_string())?;
    let ident = PredistorterLut::identity(&lin.constellation, 2).map_err(|e| e.to_string())?;
    let dev = lin_lut
        .table
        .iter()
        .zip(&ident.table)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    check(
        lower > 0.0 && dev < 1e-6,
        format!("MSE reduction {mean:.3e} (95% lower bound {lower:.3e}, 40 held-out blocks); linear identity deviation {dev:.1e}"),
    )
}

fn coded_waterfall() -> Outcome {
    let modcod: ModCod = serde_json::from_str(
        r#"{"constellation":"QPSK","rate":"1/2","tau":0.75,"nu":0.9,"w_scale":1.2,"snr_db":2.2,"eta":0.98}"#,
    )
    .map_err(|e| e.to_string())?;
    let cfg = CodedConfig {
        code_length: 4032,
        snr_db: vec![5.0, 6.0, 7.0],
        limits: BerLimits {
            min_frame_errors: 20,
            max_codewords: 100,
            batch: 10,
        },
        ..CodedConfig::default()
    };
    let points = ber_curve(&SystemConfig::default(), &modcod, &cfg, &IrOptions::default(), "").map_err(|e| e.to_string())?;
    let monotone = points.windows(2).all(|w| w[1].ber <= w[0].ber);
    let reaches = points.iter().any(|p| p.ber < 1e-3);
    let desc: Vec<String> = points
        .iter()
        .map(|p| format!("{} dB: {:.2e} ({} bits)", p.snr_db, p.ber, p.bits))
        .collect();
    check(monotone && reaches, format!("n = 4032, QPSK 1/2 packed; {}", desc.join("; ")))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for name in ["modcod-plane", "modcod-qpsk-half", "tfpack-advanced"] {
        let cfg = repo().join("scenarios").join(format!("{name}.json"));
        let mut outs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{name}-{run}"));
            let s = run_experiment(
                &cfg,
                &RunOptions {
                    out: Some(out),
                    ..Default::default()
                },
            )
            .map_err(|e| format!("{name}: {e:#}"))?;
            outs.push(s);
        }
        for f in &outs[0].manifest.files {
            let a = fs::read(outs[0].out_dir.join(&f.name)).map_err(|e| e.to_string())?;
            let b = fs::read(outs[1].out_dir.join(&f.name)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{name}/{} differs between runs", f.name));
            }
            compared += 1;
        }
    }
    check(compared > 0, format!("{compared} output files identical across reruns of 3 scenarios"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("table arithmetic", table_arithmetic),
        ("BCJR oracle equivalence", bcjr_oracle),
        ("linear-channel MI calibration", linear_calibration),
        ("CS special cases", cs_special_cases),
        ("mismatched-bound ordering", ordering),
        ("packing gain", packing_gain),
        ("predistorter efficacy", predistorter_efficacy),
        ("coded waterfall", coded_waterfall),
        ("determinism", determinism),
    ];
    let only = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
