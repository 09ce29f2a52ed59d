use proptest::prelude::*;
use tfpack::channel::HpaModel;
use tfpack::coded::{wilson_interval, CodeRate, LdpcCode};
use tfpack::detect::{bcjr_detect, UngerboeckSpec};
use tfpack::predistort::{apply_predistortion, PredistorterLut};
use tfpack::volterra::StatBlock;
use tfpack::waveform::{build_constellation, rrc_pulse, ConstellationLabel};
use tfpack::C64;

fn any_label() -> impl Strategy<Value = ConstellationLabel> {
    prop_oneof![
        Just(ConstellationLabel::Qpsk),
        Just(ConstellationLabel::Psk8),
        Just(ConstellationLabel::Apsk16),
        Just(ConstellationLabel::Apsk32),
        Just(ConstellationLabel::Apsk64),
    ]
}

fn cplx(s: f64) -> impl Strategy<Value = C64> {
    (-s..s, -s..s).prop_map(|(re, im)| C64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constellations_have_unit_energy_and_a_full_labelling(label in any_label(), r in proptest::collection::vec(0.5f64..4.0, 4)) {
        let rings = label.default_ring_ratios().len();
        let mut ratios: Vec<f64> = r[..rings].to_vec();
        ratios.sort_by(f64::total_cmp);
        let c = build_constellation(label, Some(&ratios)).unwrap();
        prop_assert!((c.energy() - 1.0).abs() < 1e-12);
        let mut labels: Vec<u32> = (0..c.order()).map(|i| c.bit_label(i)).collect();
        labels.sort_unstable();
        prop_assert_eq!(labels, (0..c.order() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn rrc_pulses_are_unit_energy_nyquist(alpha in 0.05f64..0.5, sps in 2usize..9) {
        let p = rrc_pulse(alpha, 48, sps, 1.0).unwrap();
        prop_assert!((p.energy() - 1.0).abs() < 2e-3, "energy {}", p.energy());
        for k in 1..6 {
            prop_assert!(p.autocorrelation(k * sps).abs() < 5e-3, "lag {k}: {}", p.autocorrelation(k * sps));
        }
    }

    #[test]
    fn saleh_commutes_with_phase_rotation(v in cplx(3.0), theta in -3.2f64..3.2) {
        let hpa = HpaModel::default();
        let rot = C64::from_polar(1.0, theta);
        let a = hpa.apply_one(v * rot).unwrap();
        let b = hpa.apply_one(v).unwrap() * rot;
        prop_assert!((a - b).norm() < 1e-12);
        let p_sat = hpa.saturated_power().unwrap();
        prop_assert!(a.norm_sqr() <= p_sat * (1.0 + 1e-12));
    }

    #[test]
    fn predistortion_commutes_with_cyclic_shift(
        seed in any::<u64>(),
        indices in proptest::collection::vec(0usize..4, 3..40),
        shift in 0usize..40,
    ) {
        let c = build_constellation(ConstellationLabel::Qpsk, None).unwrap();
        let mut lut = PredistorterLut::identity(&c, 1).unwrap();
        for (t, e) in lut.table.iter_mut().enumerate() {
            let h = tfpack::seed::derive(seed, &[t as u64]);
            *e += C64::new((h % 97) as f64 / 970.0, (h % 89) as f64 / 890.0);
        }
        let n = indices.len();
        let s = shift % n;
        let mut rotated = indices.clone();
        rotated.rotate_left(s);
        let mut expect = apply_predistortion(&indices, &lut);
        expect.rotate_left(s);
        prop_assert_eq!(apply_predistortion(&rotated, &lut), expect);
    }

    #[test]
    fn bcjr_posteriors_are_distributions(
        ys in proptest::collection::vec(cplx(2.0), 1..24),
        g1 in cplx(0.4),
        scale in 0.5f64..20.0,
    ) {
        let c = build_constellation(ConstellationLabel::Qpsk, None).unwrap();
        let aux = UngerboeckSpec {
            dim: 1,
            h: vec![vec![C64::new(scale, 0.0)]],
            gr: vec![vec![C64::new(scale, 0.0)], vec![g1 * scale]],
        };
        let y = StatBlock::from_scalars(ys.iter().map(|v| v * scale).collect());
        let post = bcjr_detect(&y, &aux, &c, None, None).unwrap();
        prop_assert_eq!(post.posteriors.len(), ys.len());
        for row in &post.posteriors {
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wilson_interval_contains_the_estimate(trials in 1usize..100_000, frac in 0.0f64..=1.0) {
        let errors = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(errors, trials);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn code_rates_round_trip(num in 1u32..50, extra in 1u32..50) {
        let r = CodeRate { num, den: num + extra };
        prop_assert_eq!(r.to_string().parse::<CodeRate>().unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ldpc_encoder_output_satisfies_every_check(seed in any::<u64>(), bits in any::<u64>(), rate_ix in 0usize..4) {
        let rate = [1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75][rate_ix];
        let n = 480;
        let code = LdpcCode::new(n, rate, seed).unwrap();
        let k = n - code.num_checks();
        let mut rng = tfpack::seed::stream(bits, &[]);
        let info: Vec<u8> = (0..k).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
        let word = code.encode(&info).unwrap();
        prop_assert_eq!(&word[..k], &info[..]);
        prop_assert!(code.syndrome_ok(&word));
    }
}

#[test]
fn malformed_code_rates_are_rejected() {
    for s in ["", "1", "0/2", "3/2", "2/2", "a/b", "1/0"] {
        assert!(s.parse::<CodeRate>().is_err(), "{s}");
    }
}
