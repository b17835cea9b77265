use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use femdual_bench::{poisson_fixture, tv_fidelity};
use femdual_core::assembly::{cr_weighted_stiffness, rt_mass_exact};
use femdual_core::duality::{reconstruct_flux, DiscreteProblem};
use femdual_core::experiments::solve_cr_poisson;
use femdual_core::solvers::{mixed_poisson, primal_flow, RtMass};
use femdual_core::{
    unit_square_mesh, AffineSpace, ConvexIntegrand, LowOrderTerm, P0Function, SolverConfig,
};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for level in [4, 6] {
        let mesh = unit_square_mesh(level).unwrap();
        let w = P0Function::constant(&mesh, 1.0);
        group.bench_with_input(BenchmarkId::new("cr_stiffness", level), &mesh, |b, m| {
            b.iter(|| cr_weighted_stiffness(black_box(m), &w).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rt_mass_exact", level), &mesh, |b, m| {
            b.iter(|| rt_mass_exact(black_box(m)))
        });
    }
    group.finish();
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson");
    for level in [4, 6] {
        let (mesh, f) = poisson_fixture(level);
        group.bench_with_input(
            BenchmarkId::new("cr_solve_and_reconstruct", level),
            &level,
            |b, _| {
                b.iter(|| {
                    let u = solve_cr_poisson(&mesh, &f).unwrap();
                    let pb = DiscreteProblem::new(
                        &mesh,
                        ConvexIntegrand::p_power(2.0).unwrap(),
                        LowOrderTerm::linear(f.clone()),
                    )
                    .unwrap();
                    reconstruct_flux(&pb, &u, None, 1e-8).unwrap()
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("mixed_classical", level),
            &level,
            |b, _| b.iter(|| mixed_poisson(&mesh, &f, RtMass::Exact, 1e-10).unwrap()),
        );
    }
    group.finish();
}

fn tv_flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("tv_primal_flow");
    group.sample_size(10);
    for level in [3, 4] {
        let mesh = unit_square_mesh(level).unwrap();
        let h = 0.5f64.powi(level as i32);
        let phi = ConvexIntegrand::regularized_modulus(h).unwrap();
        let lo = tv_fidelity(&mesh);
        let space = AffineSpace::crouzeix_raviart(&mesh);
        let cfg = SolverConfig {
            eps_stop: h / 20.0,
            ..Default::default()
        };
        let u0 = vec![0.0; space.num_dofs()];
        group.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, _| {
            b.iter(|| primal_flow(&space, &phi, &lo, &u0, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, poisson, tv_flow);
criterion_main!(benches);
