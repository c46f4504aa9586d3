use std::hint::black_box;
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use weightflow::experiment::{generate_dataset, init_he, train_run, Seeds};
use weightflow::stability::{propagate_interval, TangentFrame};
use weightflow::{jacobian_analytic, vector_field, Activation, Batch, Dims, TrainConfig};

fn batch(n: usize) -> Batch {
    generate_dataset(n, 1).unwrap().to_batch()
}

fn jacobian(c: &mut Criterion) {
    let p = init_he(Dims::default(), Activation::Tanh, 3).unwrap();
    for n in [32, 1000] {
        let b = batch(n);
        c.bench_function(&format!("jacobian_analytic/batch{n}"), |bench| {
            bench.iter(|| jacobian_analytic(black_box(&p), black_box(&b)).unwrap())
        });
    }
    let b = batch(32);
    c.bench_function("vector_field/batch32", |bench| bench.iter(|| vector_field(black_box(&p), black_box(&b)).unwrap()));
}

fn tangent(c: &mut Criterion) {
    let p = init_he(Dims::default(), Activation::Relu, 3).unwrap();
    let j: DMatrix<f64> = jacobian_analytic(&p, &batch(32)).unwrap().matrix;
    let frame = TangentFrame::identity(9);
    c.bench_function("propagate_interval/20_steps", |bench| {
        bench.iter(|| propagate_interval(black_box(&frame), |_| Ok(j.clone()), 0.00003, 20).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let config = TrainConfig {
        activation: Activation::Relu,
        total_steps: 2000,
        checkpoints: Some(vec![50, 100]),
        seeds: Seeds::uniform(2),
        ..TrainConfig::default()
    };
    let data = generate_dataset(config.n_samples, config.seeds.data).unwrap();
    let mut group = c.benchmark_group("train_run");
    group.sample_size(10);
    group.bench_function("relu/2000_steps", |bench| bench.iter(|| train_run(black_box(&config), &data, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, jacobian, tangent, training);
criterion_main!(benches);
