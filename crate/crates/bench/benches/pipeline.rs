//! Criterion benchmarks for the pipeline's hot pieces. The kernel table and
//! ground state are built once outside the timing loops.

use criterion::{criterion_group, criterion_main, Criterion};
use spikechain::continuum::{default_shoot_tol, shoot};
use spikechain::discrete::{initial_configuration, residual, solve_corrections};
use spikechain::geometry::{CurvatureModel, PolyModel};
use spikechain::ground_state::solve_ground_state;
use spikechain::interaction::{build_kernel, compute_psi, compute_psi_at, QuadratureSpec};
use std::hint::black_box;

fn bench_pipeline(c: &mut Criterion) {
    let profile = solve_ground_state(3.0, 1e-10, 30.0).expect("ground state");
    let kernel = build_kernel(&profile, 2.0, 40.0).expect("kernel");
    let model = CurvatureModel::Poly(PolyModel::symmetric(1.0, 28.0, 4.0));
    let eps = 1e-2;
    let sol = shoot(&model, &kernel, eps, default_shoot_tol(eps)).expect("shoot");
    let cfg0 = initial_configuration(&sol, &kernel, &model).expect("initial");

    c.bench_function("ground_state_solve_rmax30", |b| {
        b.iter(|| solve_ground_state(black_box(3.0), 1e-10, 30.0).unwrap())
    });

    c.bench_function("eval_w_bulk_and_tail", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..1000 {
                acc += profile.eval_w(black_box(0.04 * i as f64));
            }
            acc
        })
    });

    c.bench_function("psi_single_point_s10", |b| {
        b.iter(|| compute_psi(black_box(&profile), 10.0).unwrap())
    });

    c.bench_function("psi_base_resolution_s25", |b| {
        let spec = QuadratureSpec::default();
        b.iter(|| compute_psi_at(black_box(&profile), 25.0, &spec, spec.base_nodes))
    });

    c.bench_function("kernel_invert_psi1", |b| {
        b.iter(|| kernel.invert_psi1(black_box(1e-6)).unwrap())
    });

    c.bench_function("shoot_eps_1e-2", |b| {
        b.iter(|| shoot(&model, &kernel, black_box(eps), default_shoot_tol(eps)).unwrap())
    });

    c.bench_function("staged_solve_eps_1e-2", |b| {
        b.iter(|| solve_corrections(&cfg0, &kernel, &model, 1e-12 * eps * eps).unwrap())
    });

    c.bench_function("residual_eval_k66", |b| {
        let solved = solve_corrections(&cfg0, &kernel, &model, 1e-12 * eps * eps).unwrap();
        b.iter(|| residual(black_box(&solved), &kernel, &model).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_pipeline
}
criterion_main!(benches);
