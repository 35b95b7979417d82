use corrdyn::model::{FermionChainModel, InitialState};
use corrdyn::quad_dynamics::{vacuum_t2, GaussianMixture, QuadPropagator};
use corrdyn::quartic_dynamics::{build_sector_generators, steady_covariance, QuarticCore};
use corrdyn::structure::StructureMatrices;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn sector_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("sector_generators");
    for l in [4, 6, 8] {
        let model = FermionChainModel::preset(l, 1.0, 0.5, 0.5, 0.5).unwrap();
        let core = QuarticCore::new(&model, &StructureMatrices::build(&model)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(l), &core, |b, core| {
            b.iter(|| build_sector_generators(black_box(core), &[0, 2, 4]).unwrap())
        });
    }
    group.finish();
}

fn reduced_steady_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_covariance");
    group.sample_size(10);
    for l in [4, 8, 12] {
        let model = FermionChainModel::preset(l, 1.0, 0.75, 0.25, 0.5).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(l), &model, |b, model| {
            b.iter(|| steady_covariance(black_box(model)).unwrap())
        });
    }
    group.finish();
}

fn quadratic_evolution(c: &mut Criterion) {
    let l = 50;
    let model = FermionChainModel::preset(l, 1.0, 0.1, 0.2, 0.0).unwrap();
    let prop = QuadPropagator::new(&StructureMatrices::build(&model)).unwrap();
    let t2 = vacuum_t2(l);
    c.bench_function("evolve_t2_L50", |b| b.iter(|| prop.evolve_t2(black_box(&t2), 12.5)));

    let mix = GaussianMixture::of(&InitialState::Ghz, l).unwrap();
    c.bench_function("high_order_entry_L50", |b| {
        b.iter(|| {
            let at = prop.entries_at(&mix, 12.5);
            at.entry(black_box(&[0, l - 1, l, 2 * l - 1])).unwrap()
        })
    });
}

criterion_group!(benches, sector_build, reduced_steady_state, quadratic_evolution);
criterion_main!(benches);
