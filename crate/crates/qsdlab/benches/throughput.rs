//! Throughput comparison of the execution backends.
//!
//! `exec::map_indexed` dispatches to the rayon pool under the default
//! `parallel` feature and to a plain loop without it;
//! `exec::map_indexed_seq` is the always-available sequential
//! reference.  The benchmarks drive both with the crate's real
//! workload — absorbed Euler path simulation — at several ensemble
//! sizes, plus the end-to-end extinction sampler.
//!
//! Run `cargo bench` for the parallel backend and
//! `cargo bench --no-default-features` for the sequential build; the
//! group/function ids are identical, so criterion's saved baselines
//! line up for comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qsdlab::exec;
use qsdlab::model::{build_logistic, Model};
use qsdlab::sde::{sample_extinction_times, step_once, Scheme, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One synthetic path: a fixed number of absorbed Euler steps with a
/// per-index RNG substream, mirroring the per-path work unit that the
/// simulator hands to the backend.
fn path_kernel(model: &Model, index: usize, n_steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    rng.set_stream(index as u64 + 1);
    let dt = 1e-3;
    let mut x = 1.0;
    for _ in 0..n_steps {
        let z_env: f64 = rng.sample(rand_distr::StandardNormal);
        let z_dem: f64 = rng.sample(rand_distr::StandardNormal);
        x = step_once(model, 0.3, Scheme::AbsorbedEuler, x, dt, z_env, z_dem);
        if x <= 0.0 {
            // Restart instead of early exit so every index costs the
            // same: the bench measures backend overhead, not survival.
            x = 1.0;
        }
    }
    x
}

fn bench_map_backends(c: &mut Criterion) {
    let model = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
    let n_steps = 400;
    let mut group = c.benchmark_group("path-ensemble-map");
    for &n_paths in &[64usize, 256, 1024] {
        group.throughput(Throughput::Elements((n_paths * n_steps) as u64));
        group.bench_with_input(
            BenchmarkId::new("map_indexed", n_paths),
            &n_paths,
            |b, &n| b.iter(|| exec::map_indexed(n, |i| path_kernel(&model, i, n_steps))),
        );
        group.bench_with_input(
            BenchmarkId::new("map_indexed_seq", n_paths),
            &n_paths,
            |b, &n| b.iter(|| exec::map_indexed_seq(n, |i| path_kernel(&model, i, n_steps))),
        );
    }
    group.finish();
}

fn bench_extinction_sampler(c: &mut Criterion) {
    let model = build_logistic(1.0, 1.0, 1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("extinction-sampler");
    group.sample_size(10);
    for &n_paths in &[128usize, 512] {
        let cfg = SimConfig {
            dt: 2e-3,
            dt_boundary_factor: 0.25,
            t_max: 20.0,
            seed: 99,
            n_paths,
        };
        group.bench_with_input(
            BenchmarkId::new("sample_extinction_times", n_paths),
            &cfg,
            |b, cfg| {
                b.iter(|| {
                    sample_extinction_times(&model, 0.3, 1.0, Scheme::AbsorbedEuler, cfg)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_map_backends, bench_extinction_sampler);
criterion_main!(benches);
