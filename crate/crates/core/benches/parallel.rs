//! Parallel (rayon default pool) against sequential (one-thread pool).

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use julia_thermo::family::{certify, FamilySpec, Relation};
use julia_thermo::poly::Polynomial;
use julia_thermo::pressure::pressure_estimate;
use julia_thermo::tower::build_tower;
use julia_thermo::transfer::{build_mesh, leading_eigendata, single_operator, DEFAULT_EIGEN_TOL};
use julia_thermo::C64;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let seq = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let par = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", seq), ("parallel", par)]
}

fn bench_pressure(c: &mut Criterion) {
    let f = Polynomial::quadratic(C64::new(0.1, 0.05));
    let mut group = c.benchmark_group("pressure_depth_12");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| pressure_estimate(&f, None, 1.0, 12).unwrap()))
        });
    }
    group.finish();
}

fn bench_tower(c: &mut Criterion) {
    let spec = FamilySpec::cubic_pm_a(vec![Relation::new(0, 1, 1)]).unwrap();
    let a = C64::new(3f64.sqrt(), 0.0);
    let p = certify(&spec, &[a, 2.0 * a * a * a - 2.0 * a]).unwrap();
    let model = build_tower(&p, 1.5, 6).unwrap();
    let mut group = c.benchmark_group("tower_mesh_and_eigen");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let mesh = Arc::new(build_mesh(&model, 128).unwrap());
                    let motion = mesh.identity_motion().unwrap();
                    let op = single_operator(&mesh, &motion, 1.0, 0.5).unwrap();
                    leading_eigendata(&op, DEFAULT_EIGEN_TOL).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pressure, bench_tower);
criterion_main!(benches);
