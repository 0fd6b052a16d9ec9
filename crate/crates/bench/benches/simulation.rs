use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use isac_aoi::params::load_params;
use isac_aoi::sim::{SimConfig, Simulator};
use isac_aoi::GainMode;

fn simulate(c: &mut Criterion) {
    let p = load_params("tau = 1e5\nd = 100\nalpha = 0.3").unwrap();
    let sim = Simulator::from_params(&p).unwrap();
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for n in [10_000usize, 100_000] {
        g.throughput(Throughput::Elements(n as u64));
        g.bench_function(format!("packets={n}"), |b| {
            let cfg = SimConfig { n_packets: n, seed: 1, gain_mode: GainMode::PerPacket, keep_trace: false };
            b.iter(|| sim.run(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
