//! Command execution over the grid.

use committee_flow::asymptotics::{eg_both_erf_m1, eg_scm_erf_small_eta, eg_scm_linear, eta_max};
use committee_flow::moments::{mc_moment, moment, CovBlock, MomentKind};
use committee_flow::ode::{
    integrate_full, perturbative_eg, OdeConfig, PerturbativeSystem, Trajectory,
};
use committee_flow::rng::{derive_seed, rng_from, SimRng};
use committee_flow::sgd::{
    run, theorem1_deviation, time_average_final, InputSource, RunOutcome, SimTrace,
};
use committee_flow::stats::bootstrap_power_law;
use committee_flow::{measure_macro, ActivationKind, MacroState, Mode, TrainConfig};
use rayon::prelude::*;

use crate::config::{Command, ExperimentSpec};
use crate::error::CliError;
use crate::grid::{grid_points, GridPoint};
use crate::output::{num, opt, Outcome, Table};

pub const SIMULATE_HEADER: &[&str] = &[
    "figure",
    "activation",
    "mode",
    "N",
    "M",
    "K",
    "eta",
    "sigma",
    "seed",
    "alpha",
    "eg",
    "eg_min",
    "train_loss",
    "eg_ode",
];
pub const ODE_HEADER: &[&str] = &[
    "figure",
    "activation",
    "mode",
    "M",
    "K",
    "eta",
    "sigma",
    "seed",
    "alpha",
    "eg",
];
pub const SWEEP_HEADER: &[&str] = &[
    "figure",
    "activation",
    "mode",
    "N",
    "M",
    "K",
    "eta",
    "sigma",
    "seed",
    "alpha_final",
    "eg_final",
    "eg_early_stop",
];
pub const THEOREM1_HEADER: &[&str] = &[
    "K",
    "eta",
    "sigma",
    "seed",
    "N",
    "deviation",
    "deviation_stderr",
    "seeds",
];
pub const THEOREM1_FIT_HEADER: &[&str] = &[
    "K",
    "eta",
    "sigma",
    "seed",
    "slope",
    "slope_std",
    "resamples",
    "status",
];
pub const MOMENTS_HEADER: &[&str] = &[
    "activation",
    "moment",
    "case",
    "closed_form",
    "monte_carlo",
    "stderr",
    "z",
];
pub const ASYMPTOTICS_HEADER: &[&str] = &[
    "activation",
    "mode",
    "M",
    "L",
    "eta",
    "sigma",
    "quantity",
    "value",
];

/// Oracle misses beyond this many standard errors fail `moments-check`.
pub const MOMENT_Z_LIMIT: f64 = 4.0;

/// Name used for output files: the figure tag, else the command name.
pub fn output_tag(spec: &ExperimentSpec) -> String {
    match spec.figure {
        Some(fig) => fig.tag().to_string(),
        None => spec.command.name().to_string(),
    }
}

/// Runs the command of `spec` over its grid. Grid points run concurrently on
/// the current rayon pool; rows keep grid order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    let points = grid_points(spec);
    let mut outcome = Outcome {
        seeds: points
            .iter()
            .map(|p| format!("{} -> {}", p.label(), p.run_seed()))
            .collect(),
        ..Outcome::default()
    };
    match spec.command {
        Command::Simulate => {
            per_point(spec, &points, SIMULATE_HEADER, simulate_point, &mut outcome)
        }
        Command::Ode => per_point(spec, &points, ODE_HEADER, ode_point, &mut outcome),
        Command::Sweep => per_point(spec, &points, SWEEP_HEADER, sweep_point, &mut outcome),
        Command::Asymptotics => per_point(
            spec,
            &points,
            ASYMPTOTICS_HEADER,
            asymptotics_point,
            &mut outcome,
        ),
        Command::VerifyTheorem1 => verify_theorem1(spec, &points, &mut outcome),
        Command::MomentsCheck => moments_check(spec, &mut outcome),
    }
    Ok(outcome)
}

/// Rows of one grid point plus an optional failure that keeps the rows.
type PointResult = Result<(Vec<Vec<String>>, Option<String>), String>;

fn per_point(
    spec: &ExperimentSpec,
    points: &[GridPoint],
    header: &'static [&'static str],
    f: fn(&ExperimentSpec, &GridPoint) -> PointResult,
    outcome: &mut Outcome,
) {
    let results: Vec<PointResult> = points.par_iter().map(|p| f(spec, p)).collect();
    let mut table = Table::new(output_tag(spec), header);
    for (point, result) in points.iter().zip(results) {
        match result {
            Ok((rows, failure)) => {
                rows.into_iter().for_each(|r| table.push(r));
                if let Some(why) = failure {
                    outcome.failures.push(format!("{}: {why}", point.label()));
                }
            }
            Err(why) => outcome.failures.push(format!("{}: {why}", point.label())),
        }
    }
    outcome.tables.push(table);
}

fn figure(spec: &ExperimentSpec) -> String {
    spec.figure.map(|f| f.tag().to_string()).unwrap_or_default()
}

/// Leading columns shared by the per-point tables.
fn point_columns(spec: &ExperimentSpec, p: &GridPoint, with_n: bool) -> Vec<String> {
    let b = &spec.base;
    let mut out = vec![figure(spec), b.activation.to_string(), b.mode.to_string()];
    if with_n {
        out.push(b.input_dim.to_string());
    }
    out.extend([
        b.teacher_units.to_string(),
        p.k.to_string(),
        num(spec.eta_w.unwrap_or(p.eta)),
        num(p.sigma),
        p.seed.to_string(),
    ]);
    out
}

fn record_stride(spec: &ExperimentSpec) -> u64 {
    ((spec.record_every * spec.base.input_dim as f64).round() as u64).max(1)
}

fn simulate(spec: &ExperimentSpec, cfg: &TrainConfig) -> Result<SimTrace, String> {
    let teacher = cfg.teacher().map_err(|e| e.to_string())?;
    let source = InputSource::for_config(cfg, &teacher).map_err(|e| e.to_string())?;
    run(cfg, &teacher, &source, record_stride(spec)).map_err(|e| e.to_string())
}

fn divergence(trace: &SimTrace) -> Option<String> {
    match trace.outcome {
        RunOutcome::Completed => None,
        RunOutcome::Diverged { step } => Some(format!("weights diverged at step {step}")),
    }
}

fn ode_config(spec: &ExperimentSpec, cfg: &TrainConfig) -> OdeConfig {
    OdeConfig {
        activation: cfg.activation,
        eta_w: cfg.eta_w,
        eta_v: cfg.eta_v,
        sigma: cfg.sigma,
        mode: cfg.mode,
        integrator: spec.integrator,
        d_alpha: spec.d_alpha,
    }
}

fn integrate(
    spec: &ExperimentSpec,
    cfg: &TrainConfig,
    m0: &MacroState,
) -> Result<Trajectory<MacroState>, String> {
    let alpha_max = cfg.steps as f64 / cfg.input_dim as f64;
    let traj = integrate_full(m0, &ode_config(spec, cfg), alpha_max, spec.record_every)
        .map_err(|e| e.to_string())?;
    traj.into_completed().map_err(|e| e.to_string())
}

/// Linear interpolation of a trajectory recorded every `spacing`.
fn eg_at(traj: &Trajectory<MacroState>, spacing: f64, alpha: f64) -> f64 {
    let pts = &traj.points;
    let pos = (alpha / spacing).clamp(0.0, (pts.len() - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(pts.len() - 1);
    let w = pos - lo as f64;
    (1.0 - w) * pts[lo].eg + w * pts[hi].eg
}

fn simulate_point(spec: &ExperimentSpec, p: &GridPoint) -> PointResult {
    let cfg = p.train_config(spec);
    let trace = simulate(spec, &cfg)?;
    let ode = if spec.with_ode {
        Some(integrate(spec, &cfg, &trace.records[0].macro_state)?)
    } else {
        None
    };
    let lead = point_columns(spec, p, true);
    let rows = trace
        .records
        .iter()
        .map(|r| {
            let mut row = lead.clone();
            row.extend([
                num(r.alpha),
                num(r.eg),
                num(r.eg_min),
                opt(r.train_loss),
                opt(ode.as_ref().map(|t| eg_at(t, spec.record_every, r.alpha))),
            ]);
            row
        })
        .collect();
    Ok((rows, divergence(&trace)))
}

fn ode_point(spec: &ExperimentSpec, p: &GridPoint) -> PointResult {
    let cfg = p
        .train_config(spec)
        .validated()
        .map_err(|e| e.to_string())?;
    let teacher = cfg.teacher().map_err(|e| e.to_string())?;
    let student = cfg.initial_student(&teacher).map_err(|e| e.to_string())?;
    let m0 = measure_macro(&student, &teacher).map_err(|e| e.to_string())?;
    let traj = integrate(spec, &cfg, &m0)?;
    let lead = point_columns(spec, p, false);
    let rows = traj
        .points
        .iter()
        .map(|pt| {
            let mut row = lead.clone();
            row.extend([num(pt.alpha), num(pt.eg)]);
            row
        })
        .collect();
    Ok((rows, None))
}

fn sweep_point(spec: &ExperimentSpec, p: &GridPoint) -> PointResult {
    let cfg = p.train_config(spec);
    let trace = simulate(spec, &cfg)?;
    let last = trace.last();
    let eg_final = if spec.tail > 0.0 {
        time_average_final(&trace.records, spec.tail).unwrap_or(last.eg)
    } else {
        last.eg
    };
    let mut row = point_columns(spec, p, true);
    row.extend([num(last.alpha), num(eg_final), num(last.eg_min)]);
    Ok((vec![row], divergence(&trace)))
}

fn asymptotics_point(spec: &ExperimentSpec, p: &GridPoint) -> PointResult {
    let b = &spec.base;
    let (act, m) = (b.activation, b.teacher_units);
    if p.k < m {
        return Err(format!(
            "asymptotics need K >= M, got K = {} < M = {m}",
            p.k
        ));
    }
    let l = p.k - m;
    let eta = spec.eta_w.unwrap_or(p.eta);
    let mut quantities: Vec<(&str, committee_flow::Result<f64>)> = Vec::new();
    match b.mode {
        Mode::Scm => {
            let system = PerturbativeSystem::ReducedScm {
                teacher_units: m,
                extra_units: l,
                activation: act,
            };
            quantities.push(("perturbative", perturbative_eg(&system, eta, p.sigma)));
            match act {
                ActivationKind::Erf => {
                    quantities.push(("small_eta", eg_scm_erf_small_eta(m, l, eta, p.sigma)));
                    if l == 0 {
                        quantities.push(("eta_max", eta_max(m)));
                    }
                }
                ActivationKind::Linear => {
                    quantities.push(("linear", eg_scm_linear(m, l, eta, p.sigma)))
                }
                ActivationKind::Relu => {}
            }
        }
        Mode::BothLayers => {
            if act != ActivationKind::Erf || p.k % m != 0 {
                return Err("both-layers asymptotics need erf and K a multiple of M".into());
            }
            let system = PerturbativeSystem::Denoising {
                teacher_units: m,
                groups: p.k / m,
                v_star: b.teacher_v,
            };
            quantities.push(("perturbative", perturbative_eg(&system, eta, p.sigma)));
            if m == 1 {
                quantities.push(("both_m1", eg_both_erf_m1(p.k, eta, p.sigma, b.teacher_v)));
            }
        }
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (name, value) in quantities {
        match value {
            Ok(v) => rows.push(vec![
                act.to_string(),
                b.mode.to_string(),
                m.to_string(),
                l.to_string(),
                num(eta),
                num(p.sigma),
                name.to_string(),
                num(v),
            ]),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let failure = (!failures.is_empty()).then(|| failures.join("; "));
    Ok((rows, failure))
}

fn verify_theorem1(spec: &ExperimentSpec, points: &[GridPoint], outcome: &mut Outcome) {
    let t = &spec.theorem1;
    let tag = output_tag(spec);
    let mut table = Table::new(tag.clone(), THEOREM1_HEADER);
    let mut fits = Table::new(format!("{tag}_fit"), THEOREM1_FIT_HEADER);
    for p in points {
        let lead = vec![
            p.k.to_string(),
            num(spec.eta_w.unwrap_or(p.eta)),
            num(p.sigma),
            p.seed.to_string(),
        ];
        let cfg = p.train_config(spec);
        let result = theorem1_deviation(&cfg, &t.dims, t.horizon, t.seeds);
        let deviations = match result {
            Ok(d) => d,
            Err(e) => {
                outcome.failures.push(format!("{}: {e}", p.label()));
                continue;
            }
        };
        for d in &deviations {
            let spread = if d.per_seed.len() > 1 {
                let var = d
                    .per_seed
                    .iter()
                    .map(|x| (x - d.mean_deviation).powi(2))
                    .sum::<f64>()
                    / (d.per_seed.len() - 1) as f64;
                Some((var / d.per_seed.len() as f64).sqrt())
            } else {
                None
            };
            let mut row = lead.clone();
            row.extend([
                d.n.to_string(),
                num(d.mean_deviation),
                opt(spread),
                d.per_seed.len().to_string(),
            ]);
            table.push(row);
        }
        let x: Vec<f64> = deviations.iter().map(|d| d.n as f64).collect();
        let per_seed: Vec<Vec<f64>> = deviations.iter().map(|d| d.per_seed.clone()).collect();
        let mut row = lead.clone();
        if deviations.iter().all(|d| d.mean_deviation == 0.0) {
            row.extend([
                String::new(),
                String::new(),
                t.resamples.to_string(),
                "degenerate".into(),
            ]);
            outcome.notes.push(format!(
                "{}: all deviations are zero, no exponent",
                p.label()
            ));
        } else {
            match bootstrap_power_law(&x, &per_seed, t.resamples, p.run_seed()) {
                Ok(fit) => {
                    let status = if t.seeds < 2 {
                        "wide error bars (single seed)"
                    } else {
                        "ok"
                    };
                    row.extend([
                        num(fit.slope),
                        num(fit.slope_std),
                        t.resamples.to_string(),
                        status.into(),
                    ]);
                    outcome.notes.push(format!(
                        "{}: slope {:.4} +- {:.4} ({status})",
                        p.label(),
                        fit.slope,
                        fit.slope_std
                    ));
                }
                Err(e) => {
                    outcome
                        .failures
                        .push(format!("{}: fit failed: {e}", p.label()));
                    continue;
                }
            }
        }
        fits.push(row);
    }
    outcome.tables.push(table);
    outcome.tables.push(fits);
}

fn moments_check(spec: &ExperimentSpec, outcome: &mut Outcome) {
    let master = spec.axes.seed[0];
    let cases = spec.moments.cases;
    let mut table = Table::new(output_tag(spec), MOMENTS_HEADER);
    for (ai, act) in ActivationKind::ALL.into_iter().enumerate() {
        for (ki, kind) in MomentKind::ALL.into_iter().enumerate() {
            let stream = (ai * MomentKind::ALL.len() + ki) as u64;
            let mut rng: SimRng = rng_from(master, stream);
            let covs: Vec<committee_flow::Result<CovBlock>> = (0..cases)
                .map(|_| CovBlock::random(kind.dim(), &mut rng))
                .collect();
            let results: Vec<Result<(f64, f64, f64), String>> = covs
                .par_iter()
                .enumerate()
                .map(|(case, cov)| {
                    let cov = cov.as_ref().map_err(|e| e.to_string())?;
                    let exact = moment(kind, cov, act).map_err(|e| e.to_string())?;
                    let mc_seed = derive_seed(master, (stream << 32) + case as u64);
                    let (mc, stderr) = mc_moment(kind, cov, act, spec.moments.samples, mc_seed)
                        .map_err(|e| e.to_string())?;
                    Ok((exact, mc, stderr))
                })
                .collect();
            for (case, result) in results.into_iter().enumerate() {
                let label = format!("{act} {kind} case {case}");
                match result {
                    Ok((exact, mc, stderr)) => {
                        let z = if stderr > 0.0 {
                            (exact - mc) / stderr
                        } else if exact == mc {
                            0.0
                        } else {
                            f64::INFINITY
                        };
                        if !(z.abs() <= MOMENT_Z_LIMIT) {
                            outcome.failures.push(format!(
                                "{label}: closed form {exact} vs Monte Carlo {mc} +- {stderr}"
                            ));
                        }
                        table.push(vec![
                            act.to_string(),
                            kind.to_string(),
                            case.to_string(),
                            num(exact),
                            num(mc),
                            num(stderr),
                            num(z),
                        ]);
                    }
                    Err(e) => outcome.failures.push(format!("{label}: {e}")),
                }
            }
        }
    }
    outcome.tables.push(table);
}
