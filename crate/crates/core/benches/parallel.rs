use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tfpack::inforate::{estimate_ir, n0_for_es_n0, prepare_receiver, DetectorConfig, IrOptions, SystemConfig};
use tfpack::Exec;

fn rate_estimation(c: &mut Criterion) {
    let sys = SystemConfig::default().at(0.8, 0.9, 1.0).with_backoff(3.0).build().unwrap();
    let mut group = c.benchmark_group("estimate_ir");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let opts = IrOptions {
            blocks: 20,
            block_len: 200,
            training_blocks: 2,
            exec,
            ..Default::default()
        };
        let rx = prepare_receiver(&sys, &DetectorConfig::shortened(1), None, &opts).unwrap();
        let n0 = n0_for_es_n0(8.0);
        let (aux, _) = rx.aux_for(&sys, n0).unwrap();
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| estimate_ir(&sys, &rx, &aux, n0, &opts, "").unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rate_estimation);
criterion_main!(benches);
