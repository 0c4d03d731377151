//! Rayon pool against a one-thread pool on the data-parallel hot paths.
//! Build with `--no-default-features` to time the plain sequential loops.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use normalnet_core::gnf::GnfParams;
use normalnet_core::mesh::shapes;
use normalnet_core::{
    add_noise, gnf_denoise, vertex_l2_error, voxelize_mesh, NoiseSpec, VoxelParams,
};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    vec![("rayon", all), ("one-thread", one)]
}

fn gnf(c: &mut Criterion) {
    let truth = shapes::icosphere(3);
    let noisy = add_noise(&truth, &NoiseSpec::gaussian(0.2, 1)).unwrap();
    let params = GnfParams {
        nf: 2,
        nv: 10,
        ..Default::default()
    };
    let mut g = c.benchmark_group("gnf_denoise");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, noisy.num_faces()), |b| {
            b.iter(|| pool.install(|| gnf_denoise(black_box(&noisy), &params, None).unwrap()))
        });
    }
    g.finish();
}

fn voxelize(c: &mut Criterion) {
    let mesh = add_noise(&shapes::icosphere(2), &NoiseSpec::gaussian(0.2, 2)).unwrap();
    let params = VoxelParams::default();
    let mut g = c.benchmark_group("voxelize_mesh");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, mesh.num_faces()), |b| {
            b.iter(|| {
                pool.install(|| {
                    voxelize_mesh(black_box(&mesh), &params)
                        .unwrap()
                        .map(|r| r.unwrap().1.occupied())
                        .sum::<usize>()
                })
            })
        });
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let truth = shapes::icosphere(4);
    let noisy = add_noise(&truth, &NoiseSpec::gaussian(0.3, 3)).unwrap();
    let mut g = c.benchmark_group("vertex_l2_error");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, truth.num_faces()), |b| {
            b.iter(|| pool.install(|| vertex_l2_error(black_box(&noisy), &truth).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, gnf, voxelize, metrics);
criterion_main!(benches);
