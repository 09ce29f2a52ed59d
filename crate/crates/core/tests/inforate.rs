use tfpack::inforate::{
    estimate_ir, n0_for_es_n0, optimize_packing, prepare_receiver, DetectorConfig, IrOptions, SweepConfig,
    SystemConfig,
};
use tfpack::waveform::ConstellationLabel;

fn opts() -> IrOptions {
    IrOptions {
        blocks: 20,
        block_len: 300,
        ..Default::default()
    }
}

/// Binary-input AWGN mutual information per real dimension, by quadrature.
fn bpsk_mi(amplitude: f64, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let n = 4000;
    let (lo, hi) = (-10.0, 10.0);
    let dz = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let z = lo + i as f64 * dz;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let y = amplitude + sigma * z;
        let llr = 2.0 * amplitude * y / sigma2;
        let soft = if llr > 30.0 { (-llr).exp() } else { (-llr).exp().ln_1p() };
        acc += w * pdf * soft;
    }
    1.0 - acc * dz / std::f64::consts::LN_2
}

#[test]
fn noiseless_orthogonal_qpsk_carries_two_bits() {
    let sys = SystemConfig::linear(ConstellationLabel::Qpsk).build().unwrap();
    let rx = prepare_receiver(&sys, &DetectorConfig::memoryless(), None, &opts()).unwrap();
    let (aux, _) = rx.aux_for(&sys, 0.0).unwrap();
    let ir = estimate_ir(&sys, &rx, &aux, 0.0, &opts(), "").unwrap();
    assert!((ir.bits_per_channel_use - 2.0).abs() < 1e-3, "{ir:?}");
}

#[test]
fn very_low_snr_carries_almost_nothing() {
    let sys = SystemConfig::linear(ConstellationLabel::Qpsk).build().unwrap();
    let rx = prepare_receiver(&sys, &DetectorConfig::memoryless(), None, &opts()).unwrap();
    let n0 = n0_for_es_n0(-25.0);
    let (aux, _) = rx.aux_for(&sys, n0).unwrap();
    let ir = estimate_ir(&sys, &rx, &aux, n0, &opts(), "").unwrap();
    assert!(ir.bits_per_channel_use < 0.03, "{ir:?}");
}

#[test]
fn linear_awgn_matches_quadrature() {
    let sys = SystemConfig::linear(ConstellationLabel::Qpsk).build().unwrap();
    for es_n0 in [0.0, 4.0] {
        let n0 = n0_for_es_n0(es_n0);
        let oracle = 2.0 * bpsk_mi(0.5f64.sqrt(), n0);
        for det in [DetectorConfig::memoryless(), DetectorConfig::shortened(1)] {
            let rx = prepare_receiver(&sys, &det, None, &opts()).unwrap();
            let aux = rx.aux_with(n0, 0.0).unwrap();
            let ir = estimate_ir(&sys, &rx, &aux, n0, &opts(), "").unwrap();
            let tol = (3.0 * ir.half_width_95).max(0.02);
            assert!(
                (ir.bits_per_channel_use - oracle).abs() < tol,
                "{det:?} at {es_n0} dB: {} vs {oracle}",
                ir.bits_per_channel_use
            );
        }
    }
}

#[test]
fn estimates_are_reproducible() {
    let sys = SystemConfig::default().at(0.8, 0.9, 1.0).build().unwrap();
    let rx = prepare_receiver(&sys, &DetectorConfig::memoryless(), None, &opts()).unwrap();
    let n0 = n0_for_es_n0(6.0);
    let aux = rx.aux_with(n0, 0.01).unwrap();
    let a = estimate_ir(&sys, &rx, &aux, n0, &opts(), "h").unwrap();
    let b = estimate_ir(&sys, &rx, &aux, n0, &opts(), "h").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config_hash, "h");
}

#[test]
fn single_point_grid_is_its_own_maximum() {
    let base = SystemConfig::linear(ConstellationLabel::Qpsk);
    let sweep = SweepConfig::baseline(vec![5.0, 10.0], vec![3.0]);
    let out = optimize_packing(&base, &DetectorConfig::memoryless(), &sweep, &opts(), "x").unwrap();
    assert_eq!(out.surface.len(), 2);
    assert_eq!(out.regions, 1);
    for m in &out.maxima {
        assert_eq!(m.eta_m, m.eta_grid);
        assert_eq!(Some(m.eta_grid), m.baseline_eta);
        assert_eq!(m.gain_pct, Some(0.0));
        assert_eq!((m.tau, m.nu, m.w_scale), (1.0, 1.0, 1.0));
    }
    assert!(out.maxima[1].eta_m > out.maxima[0].eta_m);
}

#[test]
fn grids_without_the_baseline_report_no_gain() {
    let sweep = SweepConfig {
        tau: vec![0.8],
        nu: vec![0.9],
        w_scale: vec![1.0],
        input_backoff_db: vec![3.0],
        refine_drive: false,
        snr_db: vec![8.0],
    };
    let base = SystemConfig::linear(ConstellationLabel::Qpsk);
    let out = optimize_packing(&base, &DetectorConfig::memoryless(), &sweep, &opts(), "").unwrap();
    assert_eq!(out.maxima[0].baseline_eta, None);
    assert_eq!(out.maxima[0].gain_pct, None);
}

#[test]
fn two_point_axes_are_rejected() {
    let sweep = SweepConfig {
        tau: vec![0.9, 1.0],
        ..SweepConfig::default()
    };
    let err = optimize_packing(&SystemConfig::default(), &DetectorConfig::memoryless(), &sweep, &opts(), "");
    assert!(matches!(err, Err(tfpack::Error::GridTooSmall { axis: "tau", len: 2 })));
}

#[test]
fn sequential_and_parallel_runs_agree_bit_for_bit() {
    let sys = SystemConfig::default().at(0.8, 0.9, 1.0).with_backoff(3.0).build().unwrap();
    let run = |exec| {
        let o = IrOptions { exec, ..opts() };
        let rx = prepare_receiver(&sys, &DetectorConfig::shortened(1), None, &o).unwrap();
        let n0 = n0_for_es_n0(6.0);
        let (aux, _) = rx.aux_for(&sys, n0).unwrap();
        estimate_ir(&sys, &rx, &aux, n0, &o, "").unwrap()
    };
    let a = run(tfpack::Exec::Sequential);
    let b = run(tfpack::Exec::Parallel);
    assert_eq!(a.bits_per_channel_use.to_bits(), b.bits_per_channel_use.to_bits());
    assert_eq!(a.half_width_95.to_bits(), b.half_width_95.to_bits());
}
