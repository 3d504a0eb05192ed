//! Compares the data-parallel and sequential paths of the two hot loops:
//! per-triangle trial stratification during clustering, and cost evaluation
//! over the exhaustive tree stream.
//!
//! With the default `parallel` feature this reports the rayon pool against a
//! single-thread pool; build with `--no-default-features` to measure the
//! truly sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};
use hcse::algo::{self, HcseOptions};
use hcse::costs;
use hcse::hsbm::{self, HsbmSpec};
use hcse::oracle::{self, EnumerationMode};
use hcse::Graph;

fn benchmark_graph() -> Graph {
    let spec = HsbmSpec {
        n: 500,
        level_cluster_counts: vec![4, 20],
        p: vec![0.002, 0.05, 0.6],
        seed: 1,
        min_cluster_size: 2,
    };
    hsbm::generate(&spec).unwrap().0
}

fn clique(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v, 1.0));
        }
    }
    Graph::new(n, edges).unwrap()
}

fn bench_cluster_auto(c: &mut Criterion) {
    let graph = benchmark_graph();
    let opts = HcseOptions::default();
    let mut group = c.benchmark_group("cluster_auto_n500");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel", |b| {
            b.iter(|| algo::cluster_auto(&graph, &opts).unwrap())
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("single-thread", |b| {
            b.iter(|| pool.install(|| algo::cluster_auto(&graph, &opts).unwrap()))
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| algo::cluster_auto(&graph, &opts).unwrap())
    });

    group.finish();
}

fn bench_brute_min(c: &mut Criterion) {
    let graph = clique(7);
    let mut group = c.benchmark_group("brute_min_k7_binary");
    group.sample_size(10);

    let run = |g: &Graph| {
        oracle::brute_min(g, EnumerationMode::Binary, |g, t| {
            costs::cost_se(g, t).unwrap()
        })
        .unwrap()
    };

    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel", |b| b.iter(|| run(&graph)));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("single-thread", |b| b.iter(|| pool.install(|| run(&graph))));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(|| run(&graph)));

    group.finish();
}

criterion_group!(benches, bench_cluster_auto, bench_brute_min);
criterion_main!(benches);
