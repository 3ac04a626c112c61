use bergman_core::geometry::{build_tree, DiscPoint, Region};
use bergman_core::quadrature::{integrate_disc, Hint, QuadratureSpec};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn disc_power(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    c.bench_function("disc |w|^-1.5", |b| {
        b.iter(|| integrate_disc(|w| w.norm().powf(-1.5), &Region::WholeDisc, &Hint::powers(-1.5, 0.0), black_box(&spec)).unwrap())
    });
    let apex = DiscPoint::polar(0.9, 0.2).unwrap();
    c.bench_function("tent |1-w|^-1.8", |b| {
        b.iter(|| {
            let one = num_complex::Complex64::new(1.0, 0.0);
            integrate_disc(|w| (one - w).norm().powf(-1.8), &Region::CarlesonTentDisc { apex }, &Hint::powers(0.0, -1.8), black_box(&spec)).unwrap()
        })
    });
}

fn tree(c: &mut Criterion) {
    c.bench_function("build tree k=14", |b| b.iter(|| build_tree(black_box(0.0), 14).unwrap()));
}

criterion_group!(benches, disc_power, tree);
criterion_main!(benches);
