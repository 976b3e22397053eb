use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edca_core::analytic::{NetworkScenario, SolverOptions};
use edca_core::par::Strategy;
use edca_core::platoon::PlatoonSetup;
use edca_core::sim::{run_all, SimConfig};
use edca_core::sweep::{axis_values, SweepAxis, SweepContext};

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn station_sweep(c: &mut Criterion) {
    let xs = axis_values(10.0, 500.0, 50, false).unwrap();
    let mut group = c.benchmark_group("delay_sweep");
    for (name, strategy) in STRATEGIES {
        let ctx = SweepContext {
            scenario: NetworkScenario::default(),
            solver: SolverOptions::default(),
            platoon: PlatoonSetup::default(),
            strategy,
        };
        group.bench_with_input(BenchmarkId::new(name, xs.len()), &xs, |b, xs| {
            b.iter(|| ctx.delay_sweep(SweepAxis::NStations, xs))
        });
    }
    group.finish();
}

fn simulation_runs(c: &mut Criterion) {
    let cfg = SimConfig::new(NetworkScenario::default().with_stations(50), 1.0, 1, 8);
    let mut group = c.benchmark_group("run_all");
    group.sample_size(10);
    for (name, strategy) in STRATEGIES {
        group.bench_with_input(BenchmarkId::new(name, cfg.runs), &cfg, |b, cfg| {
            b.iter(|| run_all(cfg, strategy).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, station_sweep, simulation_runs);
criterion_main!(benches);
