use std::sync::Arc;

use ccr_folner::cp::{self, ElementFamily, SynthConfig};
use ccr_folner::lattice::{hypertrace_commutator, BoxShape, LatticeModel};
use ccr_folner::par;
use ccr_folner::{SymplecticSpace, VecX, WeylElement};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn setup() -> (Arc<SymplecticSpace>, LatticeModel, ElementFamily) {
    let s = Arc::new(SymplecticSpace::standard(1).unwrap());
    let model = LatticeModel::new(&s, vec![VecX::from_ints(&[1, 0]), VecX::from_ints(&[0, 1])], BoxShape::Symmetric, 3)
        .unwrap();
    let family = ElementFamily::new()
        .element("a", WeylElement::generator(&s, VecX::from_ints(&[1, 0])).unwrap())
        .element("b", WeylElement::generator(&s, VecX::from_ints(&[0, 1])).unwrap())
        .pair("a", "b")
        .unwrap();
    (s, model, family)
}

fn ensemble(c: &mut Criterion) {
    let (_, model, family) = setup();
    let seeds: Vec<u64> = (0..32).collect();
    let run = |seed: &u64| cp::ensemble_record(&model, &family, SynthConfig::ensemble(*seed)).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", seeds.len()), &seeds, |b, s| {
        b.iter(|| black_box(par::map_sequential(s, run)))
    });
    group.bench_with_input(BenchmarkId::new("parallel", seeds.len()), &seeds, |b, s| {
        b.iter(|| black_box(par::map_parallel(s, run)))
    });
    group.finish();
}

fn hypertrace_grid(c: &mut Criterion) {
    let (s, _, _) = setup();
    let gens = vec![VecX::from_ints(&[1, 0]), VecX::from_ints(&[0, 1])];
    let f = WeylElement::generator(&s, VecX::from_ints(&[1, 1])).unwrap();
    let grid: Vec<u64> = vec![2, 3, 4, 5];
    let run = |n: &u64| hypertrace_commutator(&s, &gens, BoxShape::Symmetric, *n, None, &f).unwrap().trace_norm;
    let mut group = c.benchmark_group("hypertrace");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| black_box(par::map_sequential(&grid, run))));
    group.bench_function("parallel", |b| b.iter(|| black_box(par::map_parallel(&grid, run))));
    group.finish();
}

criterion_group!(benches, ensemble, hypertrace_grid);
criterion_main!(benches);
