use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::error::{check_dim, Error, Result};
use crate::network::NetworkParams;
use crate::rng::{rng_from, stream};

/// Which layers are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Soft committee machine: second layer frozen.
    Scm,
    BothLayers,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Scm => "scm",
            Mode::BothLayers => "both",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scm" => Ok(Mode::Scm),
            "both" | "both_layers" | "bothlayers" => Ok(Mode::BothLayers),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

/// Order in which a finite dataset is visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpochOrder {
    Sequential,
    #[default]
    Shuffled,
}

/// Where training inputs come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InputSourceSpec {
    /// Fresh i.i.d. standard Gaussian inputs every step.
    #[default]
    GaussianStream,
    /// `samples_per_dim * N` Gaussian inputs, labelled once, revisited every epoch.
    FixedSet {
        samples_per_dim: usize,
        order: EpochOrder,
    },
    /// Images from an IDX file, labelled afresh by the teacher.
    IdxFile { path: PathBuf, order: EpochOrder },
}

/// Initial first-layer weights of the student.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitScheme {
    /// `N(0, 1)` entries for erf, variance `1/sqrt(N)` for ReLU and linear.
    #[default]
    Default,
    Normal {
        std: f64,
    },
    Explicit(NetworkParams),
    /// Student `i < M` copies teacher unit `i`; surplus units get `N(0, surplus_std^2)`
    /// entries. Needs `K >= M`.
    Specialised {
        surplus_std: f64,
    },
    /// Student `i` copies teacher unit `i mod M`; the teacher's second-layer
    /// weight is shared equally within each group, in either mode. Needs `K >= M`.
    Groups,
}

/// All hyperparameters of one SGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub input_dim: usize,
    pub teacher_units: usize,
    pub student_units: usize,
    pub activation: ActivationKind,
    pub eta_w: f64,
    pub eta_v: f64,
    /// Standard deviation of the teacher's output noise.
    pub sigma: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub mode: Mode,
    /// Number of SGD steps; `alpha = steps / N`.
    pub steps: u64,
    pub seed: u64,
    pub input_source: InputSourceSpec,
    pub init: InitScheme,
    /// Second-layer weight of every teacher unit.
    pub teacher_v: f64,
    /// Initial second-layer weight of every student unit (kept fixed in SCM mode).
    pub student_v: f64,
    /// Spread of the initial student second layer in both-layers mode.
    pub student_v_std: f64,
}

impl TrainConfig {
    /// Online SCM defaults: `eta = 0.1`, no noise, 100 N steps.
    pub fn new(
        input_dim: usize,
        teacher_units: usize,
        student_units: usize,
        activation: ActivationKind,
    ) -> Self {
        Self {
            input_dim,
            teacher_units,
            student_units,
            activation,
            eta_w: 0.1,
            eta_v: 0.0,
            sigma: 0.0,
            weight_decay: 0.0,
            batch: 1,
            mode: Mode::Scm,
            steps: 100 * input_dim as u64,
            seed: 0,
            input_source: InputSourceSpec::GaussianStream,
            init: InitScheme::Default,
            teacher_v: 1.0,
            student_v: 1.0,
            student_v_std: 0.0,
        }
    }

    /// Sets both learning rates (the second one only matters with both layers trained).
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta_w = eta;
        self.eta_v = eta;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `eta_v` as used by the dynamics: zero in SCM mode.
    pub fn effective_eta_v(&self) -> f64 {
        match self.mode {
            Mode::Scm => 0.0,
            Mode::BothLayers => self.eta_v,
        }
    }

    /// Checks ranges and returns a copy with `eta_v` forced to zero in SCM mode.
    pub fn validated(&self) -> Result<Self> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        if self.input_dim == 0 || self.teacher_units == 0 || self.student_units == 0 {
            return bad("N, M and K must be positive".into());
        }
        if self.batch == 0 {
            return bad("batch size must be at least 1".into());
        }
        for (name, value) in [
            ("eta_w", self.eta_w),
            ("eta_v", self.eta_v),
            ("sigma", self.sigma),
            ("kappa", self.weight_decay),
            ("student_v_std", self.student_v_std),
        ] {
            if !value.is_finite() || value < 0.0 {
                return bad(format!(
                    "{name} must be finite and non-negative, got {value}"
                ));
            }
        }
        if !self.teacher_v.is_finite() || !self.student_v.is_finite() {
            return bad("second-layer weights must be finite".into());
        }
        if let InputSourceSpec::FixedSet {
            samples_per_dim, ..
        } = self.input_source
        {
            if samples_per_dim == 0 {
                return bad("a fixed training set needs P >= 1".into());
            }
        }
        match &self.init {
            InitScheme::Normal { std } if !std.is_finite() || *std < 0.0 => {
                return bad(format!(
                    "initial weight std must be non-negative, got {std}"
                ));
            }
            InitScheme::Explicit(p)
                if p.hidden_units() != self.student_units || p.input_dim() != self.input_dim =>
            {
                return bad("explicit initial student has the wrong shape".into());
            }
            InitScheme::Specialised { surplus_std }
                if !surplus_std.is_finite() || *surplus_std < 0.0 =>
            {
                return bad(format!(
                    "surplus weight std must be non-negative, got {surplus_std}"
                ));
            }
            InitScheme::Specialised { .. } | InitScheme::Groups
                if self.student_units < self.teacher_units =>
            {
                return bad("teacher-based initialisation needs K >= M".into());
            }
            _ => {}
        }
        let mut out = self.clone();
        if out.mode == Mode::Scm {
            out.eta_v = 0.0;
        }
        Ok(out)
    }

    /// Standard deviation of the default initial student weights.
    pub fn default_init_std(&self) -> f64 {
        match self.activation {
            ActivationKind::Erf => 1.0,
            ActivationKind::Relu | ActivationKind::Linear => (self.input_dim as f64).powf(-0.25),
        }
    }

    /// Teacher with `N(0, 1)` first-layer entries, drawn from the teacher stream.
    pub fn teacher(&self) -> Result<NetworkParams> {
        let mut rng = rng_from(self.seed, stream::TEACHER);
        NetworkParams::gaussian(
            self.teacher_units,
            self.input_dim,
            1.0,
            vec![self.teacher_v; self.teacher_units],
            &mut rng,
        )
    }

    /// Initial student, drawn from the student stream. `teacher` is read only
    /// by the teacher-based schemes.
    pub fn initial_student(&self, teacher: &NetworkParams) -> Result<NetworkParams> {
        let mut rng = rng_from(self.seed, stream::STUDENT);
        let (k, m, n) = (self.student_units, self.teacher_units, self.input_dim);
        let second: Vec<f64> = match self.mode {
            Mode::Scm => vec![self.student_v; k],
            Mode::BothLayers => {
                let mut v_rng = rng_from(self.seed, stream::SECOND_LAYER);
                (0..k)
                    .map(|_| {
                        self.student_v + self.student_v_std * v_rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            }
        };
        match &self.init {
            InitScheme::Default => {
                NetworkParams::gaussian(k, n, self.default_init_std(), second, &mut rng)
            }
            InitScheme::Normal { std } => NetworkParams::gaussian(k, n, *std, second, &mut rng),
            InitScheme::Explicit(p) => NetworkParams::new(k, n, p.first_layer().to_vec(), second),
            InitScheme::Specialised { surplus_std } => {
                check_teacher(teacher, m, n)?;
                let mut rows: Vec<Vec<f64>> = (0..m).map(|i| teacher.row(i).to_vec()).collect();
                for _ in m..k {
                    rows.push(
                        (0..n)
                            .map(|_| surplus_std * rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    );
                }
                NetworkParams::from_rows(&rows, second)
            }
            InitScheme::Groups => {
                check_teacher(teacher, m, n)?;
                let rows: Vec<Vec<f64>> = (0..k).map(|i| teacher.row(i % m).to_vec()).collect();
                let group_size = |t: usize| (t..k).step_by(m).count() as f64;
                let shared = (0..k)
                    .map(|i| teacher.second_layer()[i % m] / group_size(i % m))
                    .collect();
                NetworkParams::from_rows(&rows, shared)
            }
        }
    }
}

fn check_teacher(teacher: &NetworkParams, m: usize, n: usize) -> Result<()> {
    check_dim("teacher hidden units", m, teacher.hidden_units())?;
    check_dim("teacher input dimension", n, teacher.input_dim())
}
