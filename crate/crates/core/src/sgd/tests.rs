use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::*;
use crate::config::{EpochOrder, InitScheme, InputSourceSpec};
use crate::gen_error::gen_error_of;
use crate::macro_state::MacroState;
use crate::rng::SimRng;

fn gaussian_vec(n: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn net(k: usize, n: usize, v: Vec<f64>, rng: &mut SimRng) -> NetworkParams {
    NetworkParams::gaussian(k, n, 1.0, v, rng).unwrap()
}

fn cfg_for(n: usize, m: usize, k: usize, act: ActivationKind, eta: f64, mode: Mode) -> TrainConfig {
    TrainConfig::new(n, m, k, act).with_eta(eta).with_mode(mode)
}

#[test]
fn hand_example() {
    let student = NetworkParams::from_rows(&[vec![0.5]], vec![1.0]).unwrap();
    let cfg = cfg_for(1, 1, 1, ActivationKind::Linear, 0.1, Mode::Scm);
    let next = sgd_step(
        &student,
        &[Sample {
            x: vec![1.0],
            y: 1.0,
        }],
        &cfg,
    )
    .unwrap();
    assert_relative_eq!(next.row(0)[0], 0.55, max_relative = 1e-15);
}

#[test]
fn zero_rates_leave_weights_unchanged() {
    let mut rng = SimRng::seed_from_u64(1);
    let student = net(2, 5, vec![0.7, -1.1], &mut rng);
    let cfg = cfg_for(5, 1, 2, ActivationKind::Erf, 0.0, Mode::BothLayers);
    let sample = Sample {
        x: gaussian_vec(5, &mut rng),
        y: 3.0,
    };
    assert_eq!(sgd_step(&student, &[sample], &cfg).unwrap(), student);
}

#[test]
fn zero_error_leaves_weights_unchanged() {
    let mut rng = SimRng::seed_from_u64(2);
    let student = net(2, 5, vec![0.7, -1.1], &mut rng);
    let cfg = cfg_for(5, 1, 2, ActivationKind::Erf, 0.4, Mode::BothLayers);
    let x = gaussian_vec(5, &mut rng);
    let y = student.forward(&x, ActivationKind::Erf).unwrap();
    assert_eq!(
        sgd_step(&student, &[Sample { x, y }], &cfg).unwrap(),
        student
    );
}

#[test]
fn wrong_batch_size_is_rejected() {
    let mut rng = SimRng::seed_from_u64(3);
    let student = net(1, 3, vec![1.0], &mut rng);
    let mut cfg = cfg_for(3, 1, 1, ActivationKind::Erf, 0.1, Mode::Scm);
    cfg.batch = 2;
    let sample = Sample {
        x: vec![1.0; 3],
        y: 0.0,
    };
    assert!(sgd_step(&student, &[sample.clone()], &cfg).is_err());
    assert!(sgd_step(
        &student,
        &[
            Sample {
                x: vec![1.0; 2],
                y: 0.0
            },
            sample
        ],
        &cfg
    )
    .is_err());
}

/// Central-difference gradient of the per-sample loss with respect to the
/// field weights `w / sqrt N` (so that `lambda = (w / sqrt N) . x`) and to `v`.
fn loss_gradient(
    student: &NetworkParams,
    sample: &Sample,
    act: ActivationKind,
) -> (Vec<f64>, Vec<f64>) {
    let (k, n) = (student.hidden_units(), student.input_dim());
    let loss = |first: &[f64], second: &[f64]| {
        let p = NetworkParams::new(k, n, first.to_vec(), second.to_vec()).unwrap();
        sample_loss(&p, sample, act).unwrap()
    };
    let h = 1e-5;
    let field_step = h * (n as f64).sqrt();
    let first = student.first_layer().to_vec();
    let second = student.second_layer().to_vec();
    let grad_w = (0..first.len())
        .map(|p| {
            let (mut up, mut down) = (first.clone(), first.clone());
            up[p] += field_step;
            down[p] -= field_step;
            (loss(&up, &second) - loss(&down, &second)) / (2.0 * h)
        })
        .collect();
    let grad_v = (0..second.len())
        .map(|p| {
            let (mut up, mut down) = (second.clone(), second.clone());
            up[p] += h;
            down[p] -= h;
            (loss(&first, &up) - loss(&first, &down)) / (2.0 * h)
        })
        .collect();
    (grad_w, grad_v)
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    diff / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn increments_follow_the_loss_gradient(
        n in 1usize..=20, k in 1usize..=3, m in 1usize..=3, seed in any::<u64>(),
        linear in any::<bool>(), eta_w in 0.01..1.0f64, eta_v in 0.01..1.0f64,
    ) {
        let act = if linear { ActivationKind::Linear } else { ActivationKind::Erf };
        let mut rng = SimRng::seed_from_u64(seed);
        let student = net(k, n, gaussian_vec(k, &mut rng), &mut rng);
        let teacher = net(m, n, gaussian_vec(m, &mut rng), &mut rng);
        let x = gaussian_vec(n, &mut rng);
        let y = teacher.forward(&x, act).unwrap() + 0.3 * rng.sample::<f64, _>(StandardNormal);
        let sample = Sample { x, y };
        let mut cfg = cfg_for(n, m, k, act, eta_w, Mode::BothLayers);
        cfg.eta_v = eta_v;
        let next = sgd_step(&student, &[sample.clone()], &cfg).unwrap();
        let (grad_w, grad_v) = loss_gradient(&student, &sample, act);
        let sqrt_n = (n as f64).sqrt();
        let dw: Vec<f64> = next.first_layer().iter().zip(student.first_layer()).map(|(a, b)| a - b).collect();
        let want_w: Vec<f64> = grad_w.iter().map(|g| -eta_w / sqrt_n * g).collect();
        let dv: Vec<f64> = next.second_layer().iter().zip(student.second_layer()).map(|(a, b)| a - b).collect();
        let want_v: Vec<f64> = grad_v.iter().map(|g| -eta_v / n as f64 * g).collect();
        prop_assume!(want_w.iter().map(|g| g.abs()).sum::<f64>() > 1e-8);
        prop_assert!(relative_error(&dw, &want_w) < 1e-5, "w: {}", relative_error(&dw, &want_w));
        prop_assert!(relative_error(&dv, &want_v) < 1e-5, "v: {}", relative_error(&dv, &want_v));
    }
}

#[test]
fn relu_increments_follow_the_loss_gradient_away_from_kinks() {
    let mut rng = SimRng::seed_from_u64(4);
    let (n, k) = (12, 3);
    let mut checked = 0;
    while checked < 20 {
        let student = net(k, n, gaussian_vec(k, &mut rng), &mut rng);
        let x = gaussian_vec(n, &mut rng);
        if student
            .local_fields(&x)
            .unwrap()
            .iter()
            .any(|l| l.abs() < 1e-3)
        {
            continue;
        }
        let sample = Sample {
            x,
            y: rng.sample(StandardNormal),
        };
        let cfg = cfg_for(n, 1, k, ActivationKind::Relu, 0.3, Mode::BothLayers);
        let next = sgd_step(&student, &[sample.clone()], &cfg).unwrap();
        let (grad_w, grad_v) = loss_gradient(&student, &sample, ActivationKind::Relu);
        let dw: Vec<f64> = next
            .first_layer()
            .iter()
            .zip(student.first_layer())
            .map(|(a, b)| a - b)
            .collect();
        let want_w: Vec<f64> = grad_w
            .iter()
            .map(|g| -0.3 / (n as f64).sqrt() * g)
            .collect();
        let dv: Vec<f64> = next
            .second_layer()
            .iter()
            .zip(student.second_layer())
            .map(|(a, b)| a - b)
            .collect();
        let want_v: Vec<f64> = grad_v.iter().map(|g| -0.3 / n as f64 * g).collect();
        if want_w.iter().all(|g| *g == 0.0) {
            continue;
        }
        assert!(relative_error(&dw, &want_w) < 1e-5);
        assert!(relative_error(&dv, &want_v) < 1e-5);
        checked += 1;
    }
}

#[test]
fn mini_batch_averages_per_sample_increments() {
    let mut rng = SimRng::seed_from_u64(5);
    let (n, k, b) = (8, 2, 3);
    let student = net(k, n, vec![0.9, -0.4], &mut rng);
    let batch: Vec<Sample> = (0..b)
        .map(|_| Sample {
            x: gaussian_vec(n, &mut rng),
            y: rng.sample(StandardNormal),
        })
        .collect();
    let mut cfg = cfg_for(n, 1, k, ActivationKind::Erf, 0.6, Mode::BothLayers);
    cfg.weight_decay = 0.2;
    cfg.batch = b;
    let next = sgd_step(&student, &batch, &cfg).unwrap();

    let mut single = cfg.clone();
    single.batch = 1;
    single.weight_decay = 0.0;
    let mut dw = vec![0.0; k * n];
    let mut dv = vec![0.0; k];
    for s in &batch {
        let one = sgd_step(&student, std::slice::from_ref(s), &single).unwrap();
        for (d, (a, o)) in dw
            .iter_mut()
            .zip(one.first_layer().iter().zip(student.first_layer()))
        {
            *d += (a - o) / b as f64;
        }
        for (d, (a, o)) in dv
            .iter_mut()
            .zip(one.second_layer().iter().zip(student.second_layer()))
        {
            *d += (a - o) / b as f64;
        }
    }
    let decay = 1.0 - 0.2 / n as f64;
    for (p, w) in next.first_layer().iter().enumerate() {
        assert_relative_eq!(
            *w,
            decay * student.first_layer()[p] + dw[p],
            epsilon = 1e-14
        );
    }
    for (p, v) in next.second_layer().iter().enumerate() {
        assert_relative_eq!(*v, student.second_layer()[p] + dv[p], epsilon = 1e-14);
    }
}

#[test]
fn both_increments_use_pre_step_weights() {
    // Linear, N = K = 1: w' = w - eta v Delta x, v' = v - eta w x Delta with the old w and v.
    let student = NetworkParams::from_rows(&[vec![0.5]], vec![2.0]).unwrap();
    let cfg = cfg_for(1, 1, 1, ActivationKind::Linear, 0.1, Mode::BothLayers);
    let next = sgd_step(
        &student,
        &[Sample {
            x: vec![1.0],
            y: 0.0,
        }],
        &cfg,
    )
    .unwrap();
    assert_relative_eq!(next.row(0)[0], 0.5 - 0.1 * 2.0 * 1.0, max_relative = 1e-15);
    assert_relative_eq!(
        next.second_layer()[0],
        2.0 - 0.1 * 0.5 * 1.0,
        max_relative = 1e-15
    );
}

#[test]
fn runs_are_deterministic() {
    let cfg = cfg_for(60, 2, 3, ActivationKind::Erf, 0.3, Mode::BothLayers)
        .with_sigma(0.2)
        .with_steps(600)
        .with_seed(7);
    let teacher = cfg.teacher().unwrap();
    let a = run(&cfg, &teacher, &InputSource::GaussianStream, 50).unwrap();
    let b = run(&cfg, &teacher, &InputSource::GaussianStream, 50).unwrap();
    assert_eq!(a, b);
    let c = run(
        &cfg.clone().with_seed(8),
        &teacher,
        &InputSource::GaussianStream,
        50,
    )
    .unwrap();
    assert_ne!(a.records.last().unwrap().eg, c.records.last().unwrap().eg);
}

#[test]
fn records_are_ordered_and_complete() {
    let cfg = cfg_for(40, 2, 2, ActivationKind::Erf, 0.3, Mode::Scm).with_steps(130);
    let teacher = cfg.teacher().unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 40).unwrap();
    let alphas: Vec<f64> = trace.records.iter().map(|r| r.alpha).collect();
    assert_eq!(alphas, vec![0.0, 1.0, 2.0, 3.0, 3.25]);
    assert_eq!(trace.outcome, RunOutcome::Completed);
    assert!(trace.records.windows(2).all(|w| w[1].eg_min <= w[0].eg_min));
}

#[test]
fn zero_steps_record_the_initial_error() {
    let cfg = cfg_for(30, 2, 3, ActivationKind::Erf, 0.3, Mode::Scm)
        .with_steps(0)
        .with_seed(3);
    let teacher = cfg.teacher().unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 10).unwrap();
    assert_eq!(trace.records.len(), 1);
    let initial = cfg.initial_student(&teacher).unwrap();
    assert_eq!(trace.final_student, initial);
    assert_relative_eq!(
        trace.records[0].eg,
        gen_error_of(&initial, &teacher, ActivationKind::Erf).unwrap(),
        max_relative = 1e-14
    );
}

#[test]
fn scm_mode_never_changes_second_layer() {
    let mut cfg = cfg_for(50, 2, 3, ActivationKind::Erf, 0.5, Mode::Scm)
        .with_sigma(0.3)
        .with_steps(2000);
    cfg.eta_v = 0.5;
    cfg.student_v = 0.7;
    let teacher = cfg.teacher().unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 500).unwrap();
    assert!(trace.final_student.second_layer().iter().all(|&v| v == 0.7));
    assert!(trace
        .records
        .iter()
        .all(|r| r.macro_state.v.iter().all(|&v| v == 0.7)));
}

#[test]
fn weight_decay_shrinks_weights_towards_a_zero_teacher() {
    let mut cfg = cfg_for(100, 1, 2, ActivationKind::Linear, 0.3, Mode::Scm).with_steps(3000);
    cfg.weight_decay = 0.5;
    cfg.init = InitScheme::Normal { std: 1.0 };
    let teacher = NetworkParams::new(1, 100, vec![0.0; 100], vec![1.0]).unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 10).unwrap();
    let norms: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.macro_state.q.trace())
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!(norms.last().unwrap() < &(0.1 * norms[0]));
}

#[test]
fn noiseless_erf_student_specialises() {
    // From N(0, 1) weights the symmetric plateau lasts until alpha ~ 400.
    let cfg = cfg_for(784, 2, 2, ActivationKind::Erf, 0.2, Mode::Scm).with_steps(1000 * 784);
    let teacher = cfg.teacher().unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 784).unwrap();
    assert!(trace.last().eg < 1e-3, "final eg {}", trace.last().eg);
}

#[test]
fn large_fixed_set_matches_online_learning() {
    let n = 100;
    let mut cfg = cfg_for(n, 2, 2, ActivationKind::Linear, 0.1, Mode::Scm)
        .with_sigma(0.5)
        .with_steps(300 * n as u64);
    let teacher = cfg.teacher().unwrap();
    let online = run(
        &cfg,
        &teacher,
        &InputSource::GaussianStream,
        (n / 10) as u64,
    )
    .unwrap();
    let samples = 100 * n;
    cfg.input_source = InputSourceSpec::FixedSet {
        samples_per_dim: 100,
        order: EpochOrder::Shuffled,
    };
    let mut rng = crate::rng::rng_from(cfg.seed, crate::rng::stream::DATASET);
    let source = InputSource::fixed_set(
        &teacher,
        ActivationKind::Linear,
        0.5,
        samples,
        EpochOrder::Shuffled,
        &mut rng,
    )
    .unwrap();
    let fixed = run(&cfg, &teacher, &source, (n / 10) as u64).unwrap();
    assert!(fixed.records.iter().all(|r| r.train_loss.is_some()));
    let a = time_average_final(&online.records, 0.5).unwrap();
    let b = time_average_final(&fixed.records, 0.5).unwrap();
    assert!((b / a - 1.0).abs() < 0.1, "online {a}, fixed set {b}");
}

#[test]
fn divergence_is_reported() {
    let cfg = cfg_for(50, 1, 1, ActivationKind::Linear, 50.0, Mode::Scm).with_steps(5000);
    let teacher = cfg.teacher().unwrap();
    let trace = run(&cfg, &teacher, &InputSource::GaussianStream, 1000).unwrap();
    assert!(matches!(trace.outcome, RunOutcome::Diverged { .. }));
}

#[test]
fn mismatched_teacher_is_rejected() {
    let cfg = cfg_for(20, 2, 2, ActivationKind::Erf, 0.1, Mode::Scm);
    let teacher = cfg_for(21, 2, 2, ActivationKind::Erf, 0.1, Mode::Scm)
        .teacher()
        .unwrap();
    assert!(run(&cfg, &teacher, &InputSource::GaussianStream, 1).is_err());
}

#[test]
fn matched_pair_realises_the_target() {
    let cfg = cfg_for(30, 2, 3, ActivationKind::Erf, 0.1, Mode::Scm);
    let target = theorem1_target(&cfg).unwrap();
    let mut rng = SimRng::seed_from_u64(3);
    let (student, teacher) = matched_pair(&target, 30, &mut rng).unwrap();
    let measured: MacroState = crate::macro_state::measure_macro(&student, &teacher).unwrap();
    assert!(measured.distance(&target) < 1e-10);
    assert!((&measured.t - &target.t).amax() < 1e-10);
    assert!(matched_pair(&target, 4, &mut rng).is_err());
}

#[test]
fn frozen_dynamics_have_zero_deviation() {
    let cfg = cfg_for(20, 2, 2, ActivationKind::Erf, 0.0, Mode::Scm);
    let points = theorem1_deviation(&cfg, &[20, 40], 2.0, 2).unwrap();
    for p in points {
        assert!(
            p.mean_deviation < 1e-10,
            "N = {}: {}",
            p.n,
            p.mean_deviation
        );
    }
}

#[test]
fn deviation_is_positive_and_finite() {
    let cfg = cfg_for(20, 2, 2, ActivationKind::Erf, 0.1, Mode::Scm).with_sigma(0.1);
    let points = theorem1_deviation(&cfg, &[50], 2.0, 2).unwrap();
    assert!(points[0].mean_deviation > 0.0 && points[0].mean_deviation.is_finite());
    assert_eq!(points[0].per_seed.len(), 2);
}
