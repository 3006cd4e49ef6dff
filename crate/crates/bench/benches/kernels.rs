use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64 as C;
use std::hint::black_box;
use xxz_maba::maba::BetheSetup;
use xxz_maba::solver::{eigenvalues, newton_solve, multistart, SolverConfig};
use xxz_maba::transfer::{double_row_monodromy, transfer_matrix};
use xxz_maba::verify::{run_suite, Suite, VerifyContext};
use xxz_maba::Sampler;

fn monodromy(c: &mut Criterion) {
    let mut g = c.benchmark_group("double_row_monodromy");
    for n in [2usize, 4, 6] {
        let ch = Sampler::new(1).chain(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &ch, |b, ch| b.iter(|| double_row_monodromy(black_box(C::new(0.8, 0.3)), ch).unwrap()));
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer_eigenvalues");
    for n in [2usize, 4, 6] {
        let t = transfer_matrix(C::new(0.8, 0.3), &Sampler::new(2).chain(n)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| eigenvalues(t).unwrap()));
    }
    g.finish();
}

fn bethe_vector(c: &mut Criterion) {
    let ch = Sampler::new(3).chain(3);
    let bs = BetheSetup::b_side(&ch, 0, 3).unwrap();
    let us = Sampler::new(4).complexes(3);
    c.bench_function("bethe_vector_n3", |b| b.iter(|| bs.psi(black_box(&us)).unwrap()));
}

fn newton(c: &mut Criterion) {
    let ch = Sampler::new(5).chain(2);
    let cfg = SolverConfig { starts: 30, ..Default::default() };
    let root = multistart(&ch, 1, &cfg).remove(0).roots;
    let start: Vec<C> = root.iter().map(|x| x * 1.01).collect();
    c.bench_function("newton_n2_from_nearby", |b| b.iter(|| newton_solve(&ch, black_box(&start), &cfg).unwrap()));
}

fn conjecture_suite(c: &mut Criterion) {
    let ctx = VerifyContext::new(Sampler::new(6).chain(3), 6);
    c.bench_function("conjecture_suite_n3", |b| b.iter(|| run_suite(Suite::Conjecture, &ctx)));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = monodromy, spectrum, bethe_vector, newton, conjecture_suite
}
criterion_main!(kernels);
