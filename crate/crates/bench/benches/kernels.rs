use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lagphase::grid::eval_operator_field;
use lagphase::linalg::{solve, BandedLu};
use lagphase::phase::{choose_a, concavity_det, g_gradient, phase_sum, PhaseBand};
use lagphase::solver::{continuity_solve, laplace_solve};
use lagphase::spectral::{eigen_decompose, linearization};
use lagphase::NewtonConfig;
use lagphase_bench::{bumped_problem, cone_spectra, herm_matrices, laplacian_rows, quadratic_problem, sym_matrices};

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigen_decompose");
    for n in 2..=4 {
        let ms = sym_matrices(n, 256);
        g.throughput(Throughput::Elements(ms.len() as u64));
        g.bench_with_input(BenchmarkId::new("real", n), &ms, |b, ms| {
            b.iter(|| ms.iter().map(|m| eigen_decompose(black_box(m)).unwrap().spectrum.largest()).sum::<f64>())
        });
    }
    for n in 1..=2 {
        let ms = herm_matrices(n, 256);
        g.throughput(Throughput::Elements(ms.len() as u64));
        g.bench_with_input(BenchmarkId::new("complex", n), &ms, |b, ms| {
            b.iter(|| ms.iter().map(|m| eigen_decompose(black_box(m)).unwrap().spectrum.largest()).sum::<f64>())
        });
    }
    g.finish();
}

fn linearize(c: &mut Criterion) {
    let ms = sym_matrices(3, 256);
    c.bench_function("linearization/real/3", |b| {
        b.iter(|| ms.iter().map(|m| linearization(black_box(m)).unwrap().get(0, 0)).sum::<f64>())
    });
}

fn phase(c: &mut Criterion) {
    let mut g = c.benchmark_group("phase");
    for n in 2..=4 {
        let spectra = cone_spectra(n, 0.5, 1024);
        let a = choose_a(&PhaseBand::new(n, 0.5).unwrap());
        g.throughput(Throughput::Elements(spectra.len() as u64));
        g.bench_with_input(BenchmarkId::new("phase_sum", n), &spectra, |b, s| {
            b.iter(|| s.iter().map(|s| phase_sum(black_box(s))).sum::<f64>())
        });
        g.bench_with_input(BenchmarkId::new("g_gradient", n), &spectra, |b, s| {
            b.iter(|| s.iter().map(|s| g_gradient(a, black_box(s))[0]).sum::<f64>())
        });
        g.bench_with_input(BenchmarkId::new("concavity_det", n), &spectra, |b, s| {
            b.iter(|| s.iter().map(|s| concavity_det(a, black_box(s))).sum::<f64>())
        });
    }
    g.finish();
}

fn banded_lu(c: &mut Criterion) {
    let mut g = c.benchmark_group("banded_lu");
    g.sample_size(20);
    for m in [15, 31, 63] {
        let a = laplacian_rows(m);
        let rhs: Vec<f64> = (0..m * m).map(|k| (k as f64).sin()).collect();
        g.bench_with_input(BenchmarkId::new("factor", m), &a, |b, a| b.iter(|| BandedLu::factor(black_box(a)).unwrap()));
        g.bench_with_input(BenchmarkId::new("solve_refined", m), &a, |b, a| {
            b.iter(|| solve(black_box(a), &rhs, 1e-12).unwrap().relative_residual)
        });
    }
    g.finish();
}

fn grid(c: &mut Criterion) {
    let spec = bumped_problem(65);
    c.bench_function("eval_operator_field/real2/65", |b| {
        b.iter(|| eval_operator_field(black_box(&spec), spec.usub()).unwrap())
    });
    c.bench_function("laplace_solve/real2/65", |b| b.iter(|| laplace_solve(black_box(spec.phi()), 1e-12).unwrap()));
}

fn newton(c: &mut Criterion) {
    let mut g = c.benchmark_group("continuity_solve");
    g.sample_size(10);
    let cfg = NewtonConfig::default();
    for res in [17, 33] {
        let spec = bumped_problem(res);
        g.bench_with_input(BenchmarkId::new("bumped_real2", res), &spec, |b, s| {
            b.iter(|| continuity_solve(black_box(s), &cfg).unwrap().1.total_newton_iters)
        });
    }
    let spec = quadratic_problem(33);
    g.bench_with_input(BenchmarkId::new("quadratic_real2", 33), &spec, |b, s| {
        b.iter(|| continuity_solve(black_box(s), &cfg).unwrap().1.total_newton_iters)
    });
    g.finish();
}

criterion_group!(benches, eigen, linearize, phase, banded_lu, grid, newton);
criterion_main!(benches);
