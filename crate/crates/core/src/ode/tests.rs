use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::asymptotics::{
    eg_both_erf_m1, eg_perceptron, eg_scm_erf_small_eta, eg_scm_linear, eta_max,
};
use crate::config::TrainConfig;
use crate::macro_state::measure_macro;
use crate::network::NetworkParams;
use crate::rng::SimRng;
use crate::sgd::{sgd_step, Sample};

fn identity_state(k: usize, m: usize) -> MacroState {
    MacroState::new(
        DMatrix::from_fn(k, m, |i, n| if i == n { 1.0 } else { 0.0 }),
        DMatrix::identity(k, k),
        DMatrix::identity(m, m),
        DVector::from_element(k, 1.0),
        DVector::from_element(m, 1.0),
    )
    .unwrap()
}

fn random_state(k: usize, m: usize, seed: u64) -> MacroState {
    let mut rng = SimRng::seed_from_u64(seed);
    let n = 40;
    let student = NetworkParams::gaussian(
        k,
        n,
        1.0,
        (0..k).map(|i| 0.6 + 0.2 * i as f64).collect(),
        &mut rng,
    )
    .unwrap();
    let teacher = NetworkParams::gaussian(
        m,
        n,
        1.0,
        (0..m).map(|i| 1.0 + 0.5 * i as f64).collect(),
        &mut rng,
    )
    .unwrap();
    measure_macro(&student, &teacher).unwrap()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[test]
fn matched_fixed_point_has_zero_rate() {
    for act in ActivationKind::ALL {
        for k in 1..=3 {
            let rate = full_rhs(
                &identity_state(k, k),
                &OdeConfig::both_layers(act, 0.7, 0.0),
            )
            .unwrap();
            assert!(
                rate.max_abs() < 1e-12,
                "{act:?} K = {k}: {}",
                rate.max_abs()
            );
        }
    }
}

#[test]
fn zero_learning_rate_has_zero_rate() {
    let m = random_state(3, 2, 1);
    for act in ActivationKind::ALL {
        let cfg = OdeConfig {
            eta_v: 0.0,
            ..OdeConfig::both_layers(act, 0.0, 0.5)
        };
        assert_eq!(full_rhs(&m, &cfg).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn scm_mode_freezes_second_layer() {
    let m = random_state(3, 2, 2);
    let cfg = OdeConfig {
        eta_v: 0.4,
        ..OdeConfig::scm(ActivationKind::Erf, 0.4, 0.1)
    };
    assert_eq!(full_rhs(&m, &cfg).unwrap().v.amax(), 0.0);
}

/// Mean and standard error of `N` times the one-step change of the order
/// parameters, over fresh samples from the same weights.
fn sgd_drift(
    cfg: &TrainConfig,
    student: &NetworkParams,
    teacher: &NetworkParams,
    samples: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.input_dim;
    let before = measure_macro(student, teacher).unwrap().pack_dynamic();
    let mut rng = SimRng::seed_from_u64(99);
    let mut sum = vec![0.0; before.len()];
    let mut sum_sq = vec![0.0; before.len()];
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.sample(rand_distr::StandardNormal);
        }
        let noise: f64 = rng.sample(rand_distr::StandardNormal);
        let y = teacher.forward(&x, cfg.activation).unwrap() + cfg.sigma * noise;
        let next = sgd_step(student, &[Sample { x: x.clone(), y }], cfg).unwrap();
        let after = measure_macro(&next, teacher).unwrap().pack_dynamic();
        for p in 0..before.len() {
            let d = n as f64 * (after[p] - before[p]);
            sum[p] += d;
            sum_sq[p] += d * d;
        }
    }
    let s = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / s).collect();
    let stderr = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| ((q / s - m * m) / (s - 1.0)).max(0.0).sqrt())
        .collect();
    (mean, stderr)
}

#[test]
fn rates_match_one_step_sgd_drift() {
    for act in [ActivationKind::Erf, ActivationKind::Relu] {
        let (n, k, m) = (5000, 3, 2);
        let mut cfg = TrainConfig::new(n, m, k, act)
            .with_eta(0.5)
            .with_sigma(0.3)
            .with_mode(Mode::BothLayers);
        cfg.steps = 1;
        let mut rng = SimRng::seed_from_u64(5);
        let student = NetworkParams::gaussian(k, n, 1.0, vec![0.8, 1.2, -0.5], &mut rng).unwrap();
        let teacher = NetworkParams::gaussian(m, n, 1.0, vec![1.0, 1.5], &mut rng).unwrap();
        let state = measure_macro(&student, &teacher).unwrap();
        let ode = full_rhs(&state, &OdeConfig::both_layers(act, 0.5, 0.3))
            .unwrap()
            .pack();
        let (mean, stderr) = sgd_drift(&cfg, &student, &teacher, 10_000);
        for p in 0..ode.len() {
            let z = (mean[p] - ode[p]).abs() / stderr[p];
            assert!(
                z < 4.0,
                "{act:?} component {p}: sgd {} +- {}, ode {}",
                mean[p],
                stderr[p],
                ode[p]
            );
        }
    }
}

#[test]
fn zero_rhs_gives_constant_trajectory() {
    let traj = integrate(
        vec![1.0, -2.0],
        |x| Ok(vec![0.0; x.len()]),
        |_| Ok(0.5),
        |x| x.to_vec(),
        Integrator::Rk4,
        0.1,
        3.0,
        0.5,
    )
    .unwrap();
    assert!(traj.completed());
    assert_eq!(traj.points.len(), 7);
    assert!(traj.points.iter().all(|p| p.state == vec![1.0, -2.0]));
}

#[test]
fn blow_up_stops_the_integration() {
    let traj = integrate(
        vec![1.0],
        |x| Ok(vec![x[0] * x[0]]),
        |_| Ok(0.0),
        |x| x[0],
        Integrator::Euler,
        0.01,
        10.0,
        1.0,
    )
    .unwrap();
    assert!(matches!(traj.outcome, TrajectoryOutcome::BlewUp { alpha } if alpha < 10.0));
    assert!(traj.last().eg.is_nan());
    assert!(traj.into_completed().is_err());
}

#[test]
fn failing_rhs_keeps_the_partial_trajectory() {
    let traj = integrate(
        vec![0.0],
        |x| {
            if x[0] > 0.5 {
                Err(Error::Divergence("test".into()))
            } else {
                Ok(vec![1.0])
            }
        },
        |_| Ok(0.0),
        |x| x[0],
        Integrator::Euler,
        0.1,
        2.0,
        0.1,
    )
    .unwrap();
    assert!(matches!(traj.outcome, TrajectoryOutcome::Failed { .. }));
    assert!(traj.points.len() > 1);
}

#[test]
fn invalid_steps_are_rejected() {
    let m = identity_state(2, 2);
    let cfg = OdeConfig::scm(ActivationKind::Erf, 0.1, 0.0).with_integrator(Integrator::Euler, 0.0);
    assert!(integrate_full(&m, &cfg, 1.0, 0.1).is_err());
    let cfg = OdeConfig::scm(ActivationKind::Erf, 0.1, 0.0);
    assert!(integrate_full(&m, &cfg, f64::NAN, 0.1).is_err());
}

fn endpoint(m0: &MacroState, integrator: Integrator, d_alpha: f64) -> Vec<f64> {
    let cfg =
        OdeConfig::both_layers(ActivationKind::Erf, 0.5, 0.2).with_integrator(integrator, d_alpha);
    integrate_full(m0, &cfg, 2.0, 2.0)
        .unwrap()
        .last()
        .state
        .pack_dynamic()
}

fn convergence_ratio(integrator: Integrator, h: f64) -> f64 {
    let m0 = random_state(2, 2, 3);
    let a = endpoint(&m0, integrator, h);
    let b = endpoint(&m0, integrator, h / 2.0);
    let c = endpoint(&m0, integrator, h / 4.0);
    let norm = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    norm(&a, &b) / norm(&b, &c)
}

#[test]
fn euler_is_first_order() {
    let ratio = convergence_ratio(Integrator::Euler, 0.02);
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn rk4_is_fourth_order() {
    let ratio = convergence_ratio(Integrator::Rk4, 0.2);
    assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
}

#[test]
fn erf_scm_escapes_the_plateau_and_converges() {
    let mut rng = SimRng::seed_from_u64(11);
    let r = DMatrix::from_fn(2, 2, |_, _| {
        1e-3 * rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.01, 0.01, 0.5]);
    let m0 = MacroState::new(
        r,
        q,
        DMatrix::identity(2, 2),
        DVector::from_element(2, 1.0),
        DVector::from_element(2, 1.0),
    )
    .unwrap();
    let cfg = OdeConfig::scm(ActivationKind::Erf, 0.1, 0.0).with_integrator(Integrator::Rk4, 0.05);
    let traj = integrate_full(&m0, &cfg, 4000.0, 10.0)
        .unwrap()
        .into_completed()
        .unwrap();
    let plateau = traj.points.iter().find(|p| p.alpha >= 50.0).unwrap().eg;
    assert!(plateau > 1e-3, "no plateau: eg = {plateau}");
    assert!(traj.last().eg < 1e-6, "final eg = {}", traj.last().eg);
}

#[test]
fn near_eta_max_still_converges() {
    for m in [1, 2] {
        let eta = 0.95 * eta_max(m).unwrap();
        let mut m0 = identity_state(m, m);
        m0.r *= 0.95;
        m0.q *= 0.95;
        let cfg =
            OdeConfig::scm(ActivationKind::Erf, eta, 0.0).with_integrator(Integrator::Rk4, 0.02);
        let traj = integrate_full(&m0, &cfg, 600.0, 100.0)
            .unwrap()
            .into_completed()
            .unwrap();
        assert!(traj.last().eg < 1e-6, "M = {m}: eg = {}", traj.last().eg);
    }
}

#[test]
fn scm_embedding_pattern() {
    let s = ReducedScmState {
        q: 1.0,
        c: 2.0,
        d: 3.0,
        e: 4.0,
        f: 5.0,
        r: 6.0,
        s: 7.0,
        u: 8.0,
    };
    let m = embed_scm(&s, 3, 2).unwrap();
    let q = DMatrix::from_row_slice(
        5,
        5,
        &[
            1., 2., 2., 3., 3., //
            2., 1., 2., 3., 3., //
            2., 2., 1., 3., 3., //
            3., 3., 3., 4., 5., //
            3., 3., 3., 5., 4.,
        ],
    );
    let r = DMatrix::from_row_slice(
        5,
        3,
        &[6., 7., 7., 7., 6., 7., 7., 7., 6., 8., 8., 8., 8., 8., 8.],
    );
    assert_eq!(m.q, q);
    assert_eq!(m.r, r);
    assert_eq!(m.t, DMatrix::identity(3, 3));
    assert!(m.v.iter().chain(m.v_star.iter()).all(|&x| x == 1.0));

    let fixed = embed_scm(&ReducedScmState::fixed_point(), 2, 1).unwrap();
    assert_eq!(
        fixed.q,
        DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 0.])
    );
    assert_eq!(
        fixed.r,
        DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 0., 0.])
    );
}

#[test]
fn denoising_embedding_pattern() {
    let s = DenoisingState {
        q: 1.0,
        c: 2.0,
        r: 3.0,
        s: 4.0,
        v: 0.5,
    };
    let m = embed_denoising(&s, 2, 2, 1.5).unwrap();
    assert_eq!(
        m.r,
        DMatrix::from_row_slice(4, 2, &[3., 4., 4., 3., 3., 4., 4., 3.])
    );
    assert_eq!(
        m.q,
        DMatrix::from_row_slice(
            4,
            4,
            &[1., 2., 1., 2., 2., 1., 2., 1., 1., 2., 1., 2., 2., 1., 2., 1.]
        )
    );
    assert_eq!(m.v, DVector::from_element(4, 0.5));
    assert_eq!(m.v_star, DVector::from_element(2, 1.5));
}

#[test]
fn reduced_fixed_point_and_zero_eta_have_zero_rate() {
    for (m, l) in [(1, 0), (2, 1), (3, 2)] {
        let d = reduced_scm_rhs(
            &ReducedScmState::fixed_point(),
            m,
            l,
            0.3,
            0.0,
            ActivationKind::Erf,
        )
        .unwrap();
        assert!(d.to_array().iter().all(|x| x.abs() < 1e-13), "{d:?}");
        let s = ReducedScmState {
            q: 0.9,
            c: 0.05,
            d: 0.02,
            e: 0.4,
            f: 0.03,
            r: 0.6,
            s: 0.04,
            u: 0.01,
        };
        let d = reduced_scm_rhs(&s, m, l, 0.0, 0.3, ActivationKind::Erf).unwrap();
        assert!(d.to_array().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn reduced_rate_matches_full_blocks() {
    let s = ReducedScmState {
        q: 0.9,
        c: 0.05,
        d: 0.02,
        e: 0.4,
        f: 0.0,
        r: 0.6,
        s: 0.04,
        u: 0.01,
    };
    let d = reduced_scm_rhs(&s, 2, 1, 0.3, 0.2, ActivationKind::Erf).unwrap();
    let full = full_rhs(
        &embed_scm(&s, 2, 1).unwrap(),
        &OdeConfig::scm(ActivationKind::Erf, 0.3, 0.2),
    )
    .unwrap();
    assert_eq!(d.q, full.q[(0, 0)]);
    assert_eq!(d.c, full.q[(0, 1)]);
    assert_eq!(d.d, full.q[(0, 2)]);
    assert_eq!(d.e, full.q[(2, 2)]);
    assert_eq!(d.r, full.r[(0, 0)]);
    assert_eq!(d.s, full.r[(0, 1)]);
    assert_eq!(d.u, full.r[(2, 0)]);
    assert_eq!(d.f, 0.0);
}

#[test]
fn off_manifold_state_is_rejected() {
    let mut m = embed_scm(&ReducedScmState::fixed_point(), 2, 1).unwrap();
    m.r[(0, 0)] = 0.5;
    let rate = full_rhs(&m, &OdeConfig::scm(ActivationKind::Erf, 0.3, 0.0)).unwrap();
    let layout = super::reduced::ScmLayout::new(2, 1).unwrap();
    assert!(matches!(
        layout.reduce(&rate),
        Err(Error::BlockInconsistency { .. })
    ));
}

#[test]
fn denoising_fixed_point_has_zero_rate() {
    for v_star in [1.0, 2.0] {
        let s = DenoisingState::fixed_point(1, v_star);
        let d = denoising_rhs(&s, 2, 1, 0.2, 0.2, 0.0, v_star).unwrap();
        assert!(d.to_array().iter().all(|x| x.abs() < 1e-13), "{d:?}");
    }
}

#[test]
fn denoising_rate_matches_full_blocks() {
    let s = DenoisingState {
        q: 0.8,
        c: 0.1,
        r: 0.7,
        s: 0.05,
        v: 0.6,
    };
    let d = denoising_rhs(&s, 2, 2, 0.3, 0.2, 0.1, 1.5).unwrap();
    let cfg = OdeConfig {
        eta_v: 0.2,
        ..OdeConfig::both_layers(ActivationKind::Erf, 0.3, 0.1)
    };
    let full = full_rhs(&embed_denoising(&s, 2, 2, 1.5).unwrap(), &cfg).unwrap();
    assert_eq!(d.q, full.q[(0, 0)]);
    assert_eq!(d.c, full.q[(0, 1)]);
    assert_eq!(d.r, full.r[(0, 0)]);
    assert_eq!(d.s, full.r[(0, 1)]);
    assert_eq!(d.v, full.v[0]);
}

fn reduced_state() -> impl Strategy<Value = ReducedScmState> {
    (
        0.5..1.5f64,
        -0.03..0.03f64,
        -0.03..0.03f64,
        0.5..1.5f64,
        -0.03..0.03f64,
        0.0..0.4f64,
        -0.05..0.05f64,
        -0.05..0.05f64,
    )
        .prop_map(|(q, c, d, e, f, r, s, u)| ReducedScmState {
            q,
            c,
            d,
            e,
            f,
            r,
            s,
            u,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scm_ansatz_is_closed(s in reduced_state(), m in 1usize..=4, l in 0usize..=4, eta in 0.05..1.0f64, sigma in 0.0..0.5f64) {
        let state = embed_scm(&s, m, l).unwrap();
        prop_assume!(state.validate().is_ok());
        let full = full_rhs(&state, &OdeConfig::scm(ActivationKind::Erf, eta, sigma)).unwrap();
        let d = reduced_scm_rhs(&s, m, l, eta, sigma, ActivationKind::Erf).unwrap();
        let blocks = embed_scm(&d, m, l).unwrap();
        let tol = 1e-10 * full.max_abs().max(1.0);
        prop_assert!(max_abs_diff(&full.q, &blocks.q) <= tol);
        prop_assert!(max_abs_diff(&full.r, &blocks.r) <= tol);
    }

    #[test]
    fn denoising_ansatz_is_closed(
        q in 0.5..1.5f64, c in -0.05..0.05f64, r in 0.0..0.5f64, s in -0.05..0.05f64, v in 0.2..1.5f64,
        m in 1usize..=3, z in 1usize..=3, v_star in 0.5..2.5f64, eta in 0.05..0.5f64, sigma in 0.0..0.5f64,
    ) {
        let s = DenoisingState { q, c, r, s, v };
        let state = embed_denoising(&s, m, z, v_star).unwrap();
        prop_assume!(state.validate().is_ok());
        let full = full_rhs(&state, &OdeConfig::both_layers(ActivationKind::Erf, eta, sigma)).unwrap();
        let d = denoising_rhs(&s, m, z, eta, eta, sigma, v_star).unwrap();
        let blocks = embed_denoising(&d, m, z, v_star).unwrap();
        let tol = 1e-10 * full.max_abs().max(1.0);
        prop_assert!(max_abs_diff(&full.q, &blocks.q) <= tol);
        prop_assert!(max_abs_diff(&full.r, &blocks.r) <= tol);
        prop_assert!((&full.v - &blocks.v).amax() <= tol);
    }
}

#[test]
fn reduced_trajectory_tracks_full_trajectory() {
    let s0 = ReducedScmState {
        q: 0.8,
        c: 0.02,
        d: 0.01,
        e: 0.6,
        f: 0.02,
        r: 0.3,
        s: 0.02,
        u: 0.01,
    };
    let cfg = OdeConfig::scm(ActivationKind::Erf, 0.5, 0.1).with_integrator(Integrator::Rk4, 0.05);
    let reduced = integrate_reduced_scm(&s0, 2, 2, &cfg, 50.0, 1.0)
        .unwrap()
        .into_completed()
        .unwrap();
    let full = integrate_full(&embed_scm(&s0, 2, 2).unwrap(), &cfg, 50.0, 1.0)
        .unwrap()
        .into_completed()
        .unwrap();
    assert_eq!(reduced.points.len(), full.points.len());
    for (a, b) in reduced.points.iter().zip(&full.points) {
        let embedded = embed_scm(&a.state, 2, 2).unwrap();
        assert!(
            embedded.distance(&b.state) < 1e-8,
            "alpha {}: {}",
            a.alpha,
            embedded.distance(&b.state)
        );
        assert!((a.eg - b.eg).abs() < 1e-10);
    }
}

#[test]
fn denoising_trajectory_tracks_full_trajectory() {
    let s0 = DenoisingState {
        q: 0.8,
        c: 0.05,
        r: 0.4,
        s: 0.05,
        v: 0.7,
    };
    let cfg = OdeConfig::both_layers(ActivationKind::Erf, 0.3, 0.1)
        .with_integrator(Integrator::Rk4, 0.05);
    let reduced = integrate_denoising(&s0, 2, 2, 1.5, &cfg, 50.0, 1.0)
        .unwrap()
        .into_completed()
        .unwrap();
    let full = integrate_full(&embed_denoising(&s0, 2, 2, 1.5).unwrap(), &cfg, 50.0, 1.0)
        .unwrap()
        .into_completed()
        .unwrap();
    for (a, b) in reduced.points.iter().zip(&full.points) {
        let embedded = embed_denoising(&a.state, 2, 2, 1.5).unwrap();
        assert!(
            embedded.distance(&b.state) < 1e-8,
            "alpha {}: {}",
            a.alpha,
            embedded.distance(&b.state)
        );
    }
}

fn scm(m: usize, l: usize, act: ActivationKind) -> PerturbativeSystem {
    PerturbativeSystem::ReducedScm {
        teacher_units: m,
        extra_units: l,
        activation: act,
    }
}

#[test]
fn perturbative_zero_noise_gives_zero() {
    assert_eq!(
        perturbative_eg(&scm(2, 1, ActivationKind::Erf), 0.1, 0.0).unwrap(),
        0.0
    );
}

#[test]
fn perturbative_single_unit_small_eta_limit() {
    let eta = 1e-4;
    let ratio = perturbative_eg(&scm(1, 0, ActivationKind::Erf), eta, 1.0).unwrap() / eta;
    assert_relative_eq!(
        ratio,
        1.0 / (2.0 * std::f64::consts::PI * 3f64.sqrt()),
        max_relative = 1e-3
    );
}

#[test]
fn perturbative_perceptron_matches_closed_form() {
    let system = PerturbativeSystem::Perceptron { teacher_norm: 1.0 };
    let eg = perturbative_eg(&system, 0.1, 0.1).unwrap();
    assert_relative_eq!(
        eg,
        eg_perceptron(1.0, 0.1, 0.1).unwrap(),
        max_relative = 1e-3
    );
    assert_relative_eq!(eg, 9.42e-5, max_relative = 1e-3);
    for t in [0.5, 2.0] {
        let system = PerturbativeSystem::Perceptron { teacher_norm: t };
        let eg = perturbative_eg(&system, 0.3, 0.1).unwrap();
        assert_relative_eq!(eg, eg_perceptron(t, 0.3, 0.1).unwrap(), max_relative = 1e-3);
    }
}

#[test]
fn perturbative_linear_matches_closed_form() {
    for eta in [0.01, 0.05] {
        for m in 1..=4 {
            for l in 0..=(8 - m).min(4) {
                let eg = perturbative_eg(&scm(m, l, ActivationKind::Linear), eta, 0.1).unwrap();
                let want = eg_scm_linear(m, l, eta, 0.1).unwrap();
                assert_relative_eq!(eg, want, max_relative = 1e-6);
            }
        }
    }
}

#[test]
fn perturbative_erf_approaches_small_eta_formula() {
    for m in 1..=4 {
        for l in 0..=4 {
            let eg = perturbative_eg(&scm(m, l, ActivationKind::Erf), 1e-3, 0.01).unwrap();
            let want = eg_scm_erf_small_eta(m, l, 1e-3, 0.01).unwrap();
            assert!(
                (eg / want - 1.0).abs() < 0.02,
                "M = {m}, L = {l}: ratio {}",
                eg / want
            );
        }
    }
}

#[test]
fn perturbative_erf_increases_with_surplus_units() {
    let egs: Vec<f64> = (0..=4)
        .map(|l| perturbative_eg(&scm(2, l, ActivationKind::Erf), 0.05, 0.01).unwrap())
        .collect();
    assert!(egs.windows(2).all(|w| w[1] > w[0]), "{egs:?}");
}

#[test]
fn perturbative_denoising_matches_single_unit_formula() {
    for groups in [1, 2, 4] {
        let system = PerturbativeSystem::Denoising {
            teacher_units: 1,
            groups,
            v_star: 2.0,
        };
        let eg = perturbative_eg(&system, 1e-3, 0.01).unwrap();
        let want = eg_both_erf_m1(groups, 1e-3, 0.01, 2.0).unwrap();
        assert!(
            (eg / want - 1.0).abs() < 0.01,
            "Z = {groups}: ratio {}",
            eg / want
        );
    }
}

#[test]
fn perturbative_residual_is_second_order_in_noise() {
    for system in [
        scm(2, 1, ActivationKind::Erf),
        scm(3, 0, ActivationKind::Erf),
    ] {
        let sol = perturbative_solve(&system, 0.1).unwrap();
        let ratio = sol.residual(0.02).unwrap() / sol.residual(0.01).unwrap();
        assert!((ratio - 16.0).abs() < 8.0, "{system:?}: ratio {ratio}");
    }
}

#[test]
fn perturbative_correction_is_quadratic_in_sigma() {
    let sol = perturbative_solve(&scm(2, 2, ActivationKind::Erf), 0.2).unwrap();
    assert_relative_eq!(sol.eg(0.2) / sol.eg(0.1), 4.0, max_relative = 1e-12);
}

#[test]
fn perturbative_conditioning_degrades_towards_eta_max() {
    for m in [1, 2, 3] {
        let top = eta_max(m).unwrap();
        let conds: Vec<f64> = [0.5, 0.9, 0.99]
            .iter()
            .map(|f| {
                perturbative_solve(&scm(m, 0, ActivationKind::Erf), f * top)
                    .unwrap()
                    .condition
            })
            .collect();
        assert!(conds.windows(2).all(|w| w[1] > w[0]), "M = {m}: {conds:?}");
        assert!(conds[2] > 10.0 * conds[0], "M = {m}: {conds:?}");
        let beyond = perturbative_solve(&scm(m, 0, ActivationKind::Erf), 1.05 * top);
        assert!(
            matches!(
                beyond,
                Err(Error::UnstableFixedPoint { .. }) | Err(Error::SingularJacobian { .. })
            ),
            "M = {m}: {beyond:?}"
        );
    }
}

#[test]
fn perturbative_rejects_invalid_systems() {
    assert!(perturbative_eg(&scm(0, 1, ActivationKind::Erf), 0.1, 0.1).is_err());
    assert!(perturbative_eg(
        &PerturbativeSystem::Perceptron { teacher_norm: -1.0 },
        0.1,
        0.1
    )
    .is_err());
    assert!(perturbative_eg(&scm(1, 0, ActivationKind::Erf), -0.1, 0.1).is_err());
}
