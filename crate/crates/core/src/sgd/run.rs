use rand::Rng;
use rand_distr::StandardNormal;

use super::input::{Feeder, InputSource};
use super::Stepper;
use crate::config::{InputSourceSpec, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::gen_error::{empirical_loss, gen_error_from_gram};
use crate::macro_state::{measure_macro, MacroState};
use crate::network::NetworkParams;
use crate::rng::{rng_from, stream};

/// Snapshot taken every `record_stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    /// Steps per input dimension.
    pub alpha: f64,
    pub eg: f64,
    /// Smallest `eg` recorded so far (early-stopping error).
    pub eg_min: f64,
    /// Mean loss over the training set; fixed datasets only.
    pub train_loss: Option<f64>,
    pub macro_state: MacroState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Weights became non-finite at this step; the last record is the diagnostic.
    Diverged {
        step: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<SimRecord>,
    pub outcome: RunOutcome,
    pub final_student: NetworkParams,
}

impl SimTrace {
    pub fn last(&self) -> &SimRecord {
        self.records
            .last()
            .expect("a trace always holds the initial record")
    }
}

/// Trains a student initialised per `cfg` against `teacher` for `cfg.steps` steps.
///
/// Labels are `teacher(x) + sigma * zeta` with fresh noise per presentation,
/// except for fixed datasets whose labels were drawn once. Records are taken
/// at step 0, every `record_stride` steps, and at the last step.
pub fn run(
    cfg: &TrainConfig,
    teacher: &NetworkParams,
    source: &InputSource,
    record_stride: u64,
) -> Result<SimTrace> {
    let student = cfg.validated()?.initial_student(teacher)?;
    run_from(cfg, teacher, student, source, record_stride)
}

/// [`run`] from an explicit initial student.
pub(crate) fn run_from(
    cfg: &TrainConfig,
    teacher: &NetworkParams,
    student: NetworkParams,
    source: &InputSource,
    record_stride: u64,
) -> Result<SimTrace> {
    let cfg = cfg.validated()?;
    check_dim(
        "teacher hidden units",
        cfg.teacher_units,
        teacher.hidden_units(),
    )?;
    check_dim(
        "teacher input dimension",
        cfg.input_dim,
        teacher.input_dim(),
    )?;
    check_dim(
        "student hidden units",
        cfg.student_units,
        student.hidden_units(),
    )?;
    if let Some(dim) = source.input_dim() {
        check_dim("input source dimension", cfg.input_dim, dim)?;
    }
    if source.is_empty() {
        return Err(Error::InvalidArgument(
            "input source holds no samples".into(),
        ));
    }
    if record_stride == 0 {
        return Err(Error::InvalidArgument(
            "record stride must be positive".into(),
        ));
    }
    let wants_source_spec = !matches!(cfg.input_source, InputSourceSpec::GaussianStream);
    if wants_source_spec && matches!(source, InputSource::GaussianStream) {
        return Err(Error::InvalidArgument(
            "configuration asks for a finite input source but a Gaussian stream was supplied"
                .into(),
        ));
    }

    let n = cfg.input_dim;
    let act = cfg.activation;
    let mut feeder = Feeder::new(source, input_rng(&cfg, source));
    let mut noise_rng = rng_from(cfg.seed, stream::NOISE);
    let mut stepper = Stepper::new(&cfg, student);
    let mut x = vec![0.0; n];
    let mut records = Vec::with_capacity((cfg.steps / record_stride + 2) as usize);
    let mut eg_min = f64::INFINITY;

    let record = |student: &NetworkParams, step: u64, eg_min: &mut f64| -> Result<SimRecord> {
        let m = measure_macro(student, teacher)?;
        let eg = if student.is_finite() {
            gen_error_from_gram(&m.gram(), m.v.as_slice(), m.v_star.as_slice(), act)?
        } else {
            f64::NAN
        };
        *eg_min = eg_min.min(eg);
        let train_loss = match source {
            InputSource::FixedSet { inputs, labels, .. } => {
                Some(empirical_loss(student, inputs, labels, act))
            }
            _ => None,
        };
        Ok(SimRecord {
            alpha: step as f64 / n as f64,
            eg,
            eg_min: *eg_min,
            train_loss,
            macro_state: m,
        })
    };

    records.push(record(&stepper.student, 0, &mut eg_min)?);
    let mut outcome = RunOutcome::Completed;
    for step in 1..=cfg.steps {
        for _ in 0..cfg.batch {
            let y = match feeder.next_into(&mut x) {
                Some(label) => label,
                None => {
                    let zeta: f64 = noise_rng.sample(StandardNormal);
                    teacher.forward_unchecked(&x, act) + cfg.sigma * zeta
                }
            };
            stepper.accumulate(&x, y);
        }
        let due = step % record_stride == 0 || step == cfg.steps;
        if due || step % 64 == 0 {
            if !stepper.student.is_finite() {
                records.push(record(&stepper.student, step, &mut eg_min)?);
                outcome = RunOutcome::Diverged { step };
                break;
            }
        }
        if due {
            records.push(record(&stepper.student, step, &mut eg_min)?);
        }
    }
    Ok(SimTrace {
        records,
        outcome,
        final_student: stepper.student,
    })
}

fn input_rng(cfg: &TrainConfig, source: &InputSource) -> crate::rng::SimRng {
    match source {
        InputSource::GaussianStream => rng_from(cfg.seed, stream::INPUTS),
        _ => rng_from(cfg.seed, stream::SHUFFLE),
    }
}

/// Mean of `eg` over records with `alpha` in the final `fraction` of the run.
pub fn time_average_final(records: &[SimRecord], fraction: f64) -> Option<f64> {
    let last = records.last()?.alpha;
    let first = records.first()?.alpha;
    let cutoff = last - fraction * (last - first);
    let tail: Vec<f64> = records
        .iter()
        .filter(|r| r.alpha >= cutoff)
        .map(|r| r.eg)
        .collect();
    if tail.is_empty() {
        None
    } else {
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}
