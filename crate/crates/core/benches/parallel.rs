use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dvts_core::autoscaler::Policy;
use dvts_core::htm::{HtmConfig, HtmRegion};
use dvts_core::par::{self, Execution};
use dvts_core::simenv::{run_experiment_with, Scenario};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn warmed_region(exec: Execution) -> HtmRegion {
    let mut r = HtmRegion::new(HtmConfig::default())
        .unwrap()
        .with_execution(exec);
    for i in 0..50 {
        let u = 30.0 + (i % 10) as f64 * 20.0;
        r.process_sample(i as f64 * 5.0, u, u / 1000.0, 0.3)
            .unwrap();
    }
    r
}

fn spatial_overlaps(c: &mut Criterion) {
    let mut g = c.benchmark_group("spatial_overlaps");
    let region = warmed_region(Execution::Sequential);
    let input = region.encode(0.0, 150.0, 0.15, 0.3).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| region.spatial().overlaps(black_box(&input), exec).unwrap())
        });
    }
    g.finish();
}

fn per_vm_scoring(c: &mut Criterion) {
    let mut g = c.benchmark_group("per_vm_scoring");
    g.sample_size(20);
    for vms in [4usize, 16] {
        for (name, exec) in MODES {
            let mut regions: Vec<HtmRegion> = (0..vms)
                .map(|_| warmed_region(Execution::Sequential))
                .collect();
            let mut t = 1000.0;
            g.bench_with_input(BenchmarkId::new(name, vms), &vms, |b, _| {
                b.iter(|| {
                    t += 5.0;
                    par::map_mut(exec, &mut regions, |r| {
                        r.process_sample(t, 120.0, 0.12, 0.3).unwrap().score
                    })
                })
            });
        }
    }
    g.finish();
}

fn experiment_run(c: &mut Criterion) {
    let mut g = c.benchmark_group("experiment_run");
    g.sample_size(10);
    let mut s = Scenario::default();
    s.duration_seconds = 3600.0;
    let dvts = Policy::Dvts;
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                run_experiment_with(&s, &dvts, 1, exec)
                    .unwrap()
                    .total_cost()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, spatial_overlaps, per_vm_scoring, experiment_run);
criterion_main!(benches);
