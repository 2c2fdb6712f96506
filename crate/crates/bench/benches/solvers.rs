use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hodgelab::derham::{manufactured_problem, triangulated_square_mesh, unit_interval_mesh, whitney_complex, Flavor, ScalarField};
use hodgelab::mixed::{assemble_mixed, LinearSolver, SolutionOperators};
use hodgelab::semilinear::{solve_hammerstein_load, HammersteinOptions, Strategy};
use std::hint::black_box;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for n in [8, 16, 32] {
        let w = whitney_complex(&triangulated_square_mesh(n).unwrap(), Flavor::Natural).unwrap();
        g.bench_with_input(BenchmarkId::new("whitney_square", n), &n, |b, &n| {
            let mesh = triangulated_square_mesh(n).unwrap();
            b.iter(|| whitney_complex(black_box(&mesh), Flavor::Natural).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mixed_square_k1", n), &w, |b, w| {
            b.iter(|| assemble_mixed(black_box(w.complex()), 1).unwrap())
        });
    }
    g.finish();
}

fn mixed_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("mixed_solve");
    for n in [16, 32] {
        let w = whitney_complex(&triangulated_square_mesh(n).unwrap(), Flavor::Essential).unwrap();
        let prob = manufactured_problem("square_linear", &w).unwrap();
        for (label, solver) in [("direct", LinearSolver::Direct), ("minres", LinearSolver::minres())] {
            g.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                b.iter(|| {
                    SolutionOperators::with_solver(w.complex(), 0, solver)
                        .unwrap()
                        .solve_load(black_box(&prob.load))
                        .unwrap()
                })
            });
        }
    }
    g.finish();
}

fn hammerstein(c: &mut Criterion) {
    let mut g = c.benchmark_group("hammerstein");
    let w = whitney_complex(&unit_interval_mesh(256).unwrap(), Flavor::Essential).unwrap();
    let prob = manufactured_problem("interval_cubic", &w).unwrap();
    let field = ScalarField::new(&w, 0).unwrap();
    let ops = SolutionOperators::new(w.complex(), 0).unwrap();
    for strategy in [Strategy::Newton, Strategy::DampedFixedPoint] {
        let opts = HammersteinOptions {
            strategy,
            ..HammersteinOptions::default()
        };
        g.bench_function(format!("interval_cubic_256_{strategy:?}"), |b| {
            b.iter(|| solve_hammerstein_load(&ops, &field, &prob.nonlinearity, black_box(&prob.load), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, mixed_solve, hammerstein);
criterion_main!(benches);
