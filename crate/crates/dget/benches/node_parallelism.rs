//! Parallel vs sequential per-node gradient work, plus a whole-run sample.
//!
//! The engine parallelizes over nodes behind the `parallel` feature; these
//! benches measure the same workload through an explicit rayon loop and a
//! plain sequential loop so the two strategies can be compared in one
//! build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dget::engine::{run_dget, Algorithm, AlgorithmConfig, Mode};
use dget::problems::{FiniteSumProblem, Problem, ProblemKind};
use dget::stacked::Stacked;
use dget::theory::finite_sum_batch_plan;
use dget::topology::{metropolis_weights, Graph};
use rayon::prelude::*;
use std::hint::black_box;

fn refresh_workload(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_full_gradient");
    for &(m, n, d) in &[(8usize, 512usize, 32usize), (32, 2048, 64)] {
        let problem =
            FiniteSumProblem::new(ProblemKind::NonconvexLogistic, m, n, d, 7, 0.1).unwrap();
        let x = Stacked::constant(m, d, 0.25);
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("m{m}_n{n}_d{d}")),
            &problem,
            |b, p| {
                b.iter(|| {
                    let mut out = Stacked::zeros(m, d);
                    for i in 0..m {
                        out.node_mut(i)
                            .copy_from_slice(&p.local_full_gradient(i, x.node(i)));
                    }
                    black_box(out)
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("rayon", format!("m{m}_n{n}_d{d}")),
            &problem,
            |b, p| {
                b.iter(|| {
                    let mut out = Stacked::zeros(m, d);
                    out.data_mut()
                        .par_chunks_mut(d)
                        .enumerate()
                        .for_each(|(i, block)| {
                            block.copy_from_slice(&p.local_full_gradient(i, x.node(i)));
                        });
                    black_box(out)
                })
            },
        );
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let m = 8;
    let (n, d) = (256, 16);
    let problem = Problem::FiniteSum(
        FiniteSumProblem::new(ProblemKind::NonconvexLogistic, m, n, d, 3, 0.1).unwrap(),
    );
    let w = metropolis_weights(&Graph::ring(m).unwrap());
    let (q, s2) = finite_sum_batch_plan(n);
    let mut config = AlgorithmConfig::new(Algorithm::Dget, Mode::FiniteSum, 0.05, 200);
    config.q = q;
    config.s2 = s2;
    config.diag_every = 10;
    c.bench_function("run_dget/ring8_n256_d16_T200", |b| {
        b.iter(|| black_box(run_dget(&problem, &w, &config).unwrap()))
    });
}

criterion_group!(benches, refresh_workload, full_run);
criterion_main!(benches);
