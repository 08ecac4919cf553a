use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pme_core::inference::{gamma_grid, quadrature_posterior, FnPotential};
use pme_core::resolvent::contraction_check;
use pme_core::{Boundary, ConstitutiveModel, Exec, GridField, GridSpec, GrowthLaw, ResolventConfig};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn contraction_sweep(c: &mut Criterion) {
    let spec = GridSpec::new(1, 1.0, 128, Boundary::DirichletZero).unwrap();
    let model = ConstitutiveModel::new(2.0, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap();
    let cfg = ResolventConfig::with_tau(0.5);
    let pairs: Vec<(GridField, GridField)> = (0..16)
        .map(|k| {
            let a = 1.0 + 0.1 * k as f64;
            let f1 = GridField::from_fn(spec, |x| (a * x[0] * 3.0).sin().max(0.0)).unwrap();
            let f2 = GridField::from_fn(spec, |x| (a * x[0] * 3.0 + 0.2).cos() * 0.5).unwrap();
            (f1, f2)
        })
        .collect();
    let mut group = c.benchmark_group("contraction_sweep");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| exec.try_map(&pairs, |(f1, f2)| contraction_check(f1, f2, &model, &cfg)).unwrap())
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let spec = GridSpec::new(1, 1.0, 64, Boundary::DirichletZero).unwrap();
    let u0 = GridField::from_fn(spec, |x| (1.0 - 4.0 * x[0] * x[0]).max(0.0)).unwrap();
    let base = ConstitutiveModel::new(2.0, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap();
    // Potential: L1 distance of one implicit step to the gamma = 2 step.
    let reference = pme_core::solve_resolvent(&u0, &base, &ResolventConfig::with_tau(0.05)).unwrap().u;
    let pot = FnPotential {
        f: move |g: f64| {
            let m = base.with_gamma(g).unwrap();
            let u = pme_core::solve_resolvent(&u0, &m, &ResolventConfig::with_tau(0.05)).unwrap().u;
            u.l1_distance(&reference).unwrap() * 100.0
        },
        support: [1.2, 3.0],
    };
    let grid = gamma_grid(1.5, 2.5, 32);
    let mut group = c.benchmark_group("quadrature_posterior");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| quadrature_posterior(&pot, &grid, *exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, contraction_sweep, quadrature);
criterion_main!(benches);
