use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use committee_flow::ode::{full_rhs, OdeConfig};
use committee_flow::rng::{rng_from, stream};
use committee_flow::sgd::{sgd_step, Sample};
use committee_flow::{measure_macro, ActivationKind, TrainConfig};
use rand::Rng;
use rand_distr::StandardNormal;

fn bench_full_rhs(c: &mut Criterion) {
    for act in [ActivationKind::Erf, ActivationKind::Relu] {
        for k in [2, 4, 8] {
            let cfg = TrainConfig::new(500, 4, k, act);
            let teacher = cfg.teacher().unwrap();
            let student = cfg.initial_student(&teacher).unwrap();
            let m = measure_macro(&student, &teacher).unwrap();
            let ode = OdeConfig::scm(act, 0.1, 0.01);
            c.bench_function(&format!("full_rhs/{act}/M4K{k}"), |b| {
                b.iter(|| full_rhs(black_box(&m), &ode).unwrap())
            });
        }
    }
}

fn bench_sgd_step(c: &mut Criterion) {
    for n in [100, 784, 4000] {
        let cfg = TrainConfig::new(n, 4, 4, ActivationKind::Erf);
        let teacher = cfg.teacher().unwrap();
        let student = cfg.initial_student(&teacher).unwrap();
        let mut rng = rng_from(0, stream::INPUTS);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y = teacher.forward(&x, cfg.activation).unwrap();
        let batch = [Sample { x, y }];
        c.bench_function(&format!("sgd_step/N{n}"), |b| {
            b.iter_batched(
                || student.clone(),
                |s| sgd_step(&s, black_box(&batch), &cfg).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group!(benches, bench_full_rhs, bench_sgd_step);
criterion_main!(benches);
