//! Sequential against rayon execution for the data-parallel loops: sampling
//! the left-curtain map, drawing paths from a plan, and checking a hedge on
//! those paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robust_amput::fixtures::uniform_pair;
use robust_amput::hedging::{superhedge_for, verify_pathwise_with};
use robust_amput::leftcurtain::{to_transport_plan, BuildOptions, LeftCurtainMap};
use robust_amput::pricing::{price, StrikePair};
use robust_amput::simulate::sample_pairs;
use robust_amput::Exec;

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn map_build(c: &mut Criterion) {
    let (mu, nu) = uniform_pair(1000);
    let mut group = c.benchmark_group("map_build");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let opts = BuildOptions { samples: 4000, exec, ..BuildOptions::default() };
        group.bench_function(BenchmarkId::new(name, opts.samples), |b| {
            b.iter(|| LeftCurtainMap::build_with(black_box(&mu), black_box(&nu), opts).unwrap())
        });
    }
    group.finish();
}

fn paths(c: &mut Criterion) {
    let (mu, nu) = uniform_pair(1000);
    let map = LeftCurtainMap::build(&mu, &nu).unwrap();
    let k = StrikePair::new(0.5, 0.25);
    let sol = price(&map, k).unwrap();
    let h = superhedge_for(&sol, &map, k).unwrap();
    let plan = to_transport_plan(&map).unwrap();
    let n = 200_000;
    let pairs = sample_pairs(&plan, n, 42, Exec::Sequential).unwrap();

    let mut group = c.benchmark_group("paths");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::new(format!("sample/{name}"), n), |b| {
            b.iter(|| sample_pairs(black_box(&plan), n, 42, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new(format!("verify/{name}"), n), |b| {
            b.iter(|| verify_pathwise_with(black_box(&h), black_box(&pairs), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, map_build, paths);
criterion_main!(benches);
