use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cwp_core::exact::spectral::{Spectrum, DEFAULT_MAX_DENSE};
use cwp_core::exact::{build_exact_chain, ChainOptions};
use cwp_core::sim::{estimate_hitting, Record, SimMode, SimSpec};
use cwp_core::{Exec, ModelParams, RateKind};

fn start_sweep(c: &mut Criterion) {
    let params = ModelParams::new(3, 3.4, 30, RateKind::Sqrt).unwrap();
    let pc = build_exact_chain(params, ChainOptions::default()).unwrap();
    let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE).unwrap();
    let starts: Vec<usize> = (0..pc.len()).collect();
    let mut g = c.benchmark_group("worst_tv_sweep_q3_n30");
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| sp.worst_tv(&starts, 500.0, e))
        });
    }
    g.finish();
}

fn replicas(c: &mut Criterion) {
    let params = ModelParams::new(3, 3.2, 12, RateKind::Sqrt).unwrap();
    let mut g = c.benchmark_group("hitting_replicas_q3_n12");
    g.sample_size(20);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let spec = SimSpec {
            params,
            mode: SimMode::FullConfig,
            replicas: 2000,
            seed: 1,
            t_max: 1e6,
            record: Record::HittingOnly,
            exec,
        };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &spec, |b, s| {
            b.iter(|| estimate_hitting(s, &[4, 4, 4], |x: &[u32]| x[0] >= 9).unwrap().mean)
        });
    }
    g.finish();
}

criterion_group!(benches, start_sweep, replicas);
criterion_main!(benches);
