use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use svramd::algorithms::{run_svramd, RunOptions};
use svramd::bregman::ProximalFamily;
use svramd::exec::Execution;
use svramd::hyper::{HyperParams, OutputRule};
use svramd::problems::{FiniteSumProblem, Regularizer, SigmoidRegressionSpec};
use svramd::rng::{sample_without_replacement, Purpose, RngStream};
use svramd::DenseVector;

fn problem(n: usize, d: usize) -> FiniteSumProblem {
    let spec = SigmoidRegressionSpec {
        feature_scale: 4.0,
        ..SigmoidRegressionSpec::new(n, d, 0.1)
    };
    spec.build(&mut RngStream::for_purpose(0, Purpose::Data))
        .unwrap()
        .with_regularizer(Regularizer::l1(1e-3).unwrap())
}

fn point(d: usize) -> DenseVector {
    let mut rng = RngStream::for_purpose(1, Purpose::Aux(0));
    DenseVector::new((0..d).map(|_| 0.1 * rng.normal()).collect()).unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn full_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_gradient");
    for n in [5_000, 50_000] {
        let base = problem(n, 50);
        let x = point(50);
        for (name, exec) in MODES {
            let p = base.clone().with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, n), &x, |b, x| {
                b.iter(|| black_box(p.full_gradient(x).unwrap()))
            });
        }
    }
    group.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_gradient");
    let base = problem(50_000, 50);
    let x = point(50);
    for size in [64, 4096] {
        let batch = sample_without_replacement(&mut RngStream::new(2, 0), 50_000, size).unwrap();
        for (name, exec) in MODES {
            let p = base.clone().with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, size), &batch, |b, batch| {
                b.iter(|| black_box(p.mean_gradient(batch, &x).unwrap()))
            });
        }
    }
    group.finish();
}

fn svramd_rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("svramd_rounds");
    group.sample_size(10);
    let base = problem(5_000, 50);
    let hp = HyperParams {
        alpha: 0.2,
        outer_batch: 5_000,
        batch: 100,
        inner_steps: 10,
        rounds: 20,
        output: OutputRule::LastIterate,
    };
    let opts = RunOptions {
        checkpoint_every: 20,
        ..RunOptions::default()
    };
    for (name, exec) in MODES {
        let p = base.clone().with_execution(exec);
        group.bench_function(name, |b| {
            b.iter(|| black_box(run_svramd(&p, ProximalFamily::Euclidean, &hp, &opts, 0).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, full_gradient, batch_gradient, svramd_rounds);
criterion_main!(benches);
