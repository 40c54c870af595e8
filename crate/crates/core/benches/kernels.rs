//! Data-parallel kernels on the default rayon pool against a single-thread pool.
//!
//! With `--no-default-features` only the sequential fallback is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::sync::Arc;

use twoscale_core::estimator::{estimate, AdaptProblem};
use twoscale_core::harness::{snapshot_errors, ManufacturedProblem, SnapshotProblem};
use twoscale_core::twoscale::{assemble_system, eval_f, CouplingMode, Scheme, Stepper};

type Runner = Box<dyn Fn(&(dyn Fn() + Sync))>;

fn modes() -> Vec<(&'static str, Runner)> {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        vec![
            ("parallel", Box::new(|f: &(dyn Fn() + Sync)| f()) as Runner),
            (
                "sequential",
                Box::new(move |f: &(dyn Fn() + Sync)| single.install(f)) as Runner,
            ),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", Box::new(|f: &(dyn Fn() + Sync)| f()) as Runner)]
    }
}

fn kernels(c: &mut Criterion) {
    let problem = ManufacturedProblem::smooth();
    let n = 32;
    let snap = SnapshotProblem {
        problem: &problem,
        n_micro: n,
    };
    let (ops, state) = snap.solve(Arc::new(problem.macro_mesh(n).unwrap())).unwrap();
    let stepper = Stepper::new(
        &ops,
        &problem.reaction,
        &problem,
        1e-3,
        Scheme::CrankNicolson,
        CouplingMode::Iterated,
    )
    .unwrap();
    let zero = vec![0.0; state.beta.len()];
    let (xs, ys) = problem.spaces(n, n).unwrap();

    for (name, run) in modes() {
        let mut g = c.benchmark_group("kernels");
        g.sample_size(20);
        g.bench_function(BenchmarkId::new("micro_sweep", name), |b| {
            b.iter(|| {
                run(&|| {
                    std::hint::black_box(stepper.micro_sweep(&state.beta, &state.alpha, &state.alpha, &zero, &zero));
                })
            })
        });
        g.bench_function(BenchmarkId::new("eval_f", name), |b| {
            b.iter(|| {
                run(&|| {
                    std::hint::black_box(eval_f(
                        &ops,
                        &problem.reaction,
                        &problem,
                        0.0,
                        &state.alpha,
                        &state.beta,
                    ));
                })
            })
        });
        g.bench_function(BenchmarkId::new("estimate", name), |b| {
            b.iter(|| {
                run(&|| {
                    std::hint::black_box(estimate(&state, &ops, &problem.reaction, &problem, 1.0).unwrap());
                })
            })
        });
        g.bench_function(BenchmarkId::new("two_scale_errors", name), |b| {
            b.iter(|| {
                run(&|| {
                    std::hint::black_box(snapshot_errors(&ops, &state, &problem));
                })
            })
        });
        g.bench_function(BenchmarkId::new("assemble_system", name), |b| {
            b.iter(|| {
                run(&|| {
                    std::hint::black_box(assemble_system(&xs, &ys, &problem.params).unwrap());
                })
            })
        });
        g.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
