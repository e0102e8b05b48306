//! Plain-text experiment configuration.
//!
//! One `key = value` pair per line, optional `[section]` headers, `#` starts a
//! comment. Keys are case-sensitive and unique across sections; a key placed
//! under a header must belong to that section. List-valued keys take
//! comma-separated values. Command-line `key=value` arguments are applied
//! after the file and override it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use committee_flow::ode::Integrator;
use committee_flow::{ActivationKind, EpochOrder, InitScheme, InputSourceSpec, Mode, TrainConfig};
use thiserror::Error;

use crate::presets::Figure;

/// Where a setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Argument(usize),
    Preset(Figure),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Argument(n) => write!(f, "argument {n}"),
            Origin::Preset(fig) => write!(f, "preset {fig}"),
            Origin::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: expected `key = value`, got '{text}'")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown section [{section}]")]
    UnknownSection { origin: Origin, section: String },
    #[error("{origin}: unknown key '{key}'")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: key '{key}' belongs in section [{expected}], found under [{found}]")]
    WrongSection {
        origin: Origin,
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("{origin}: key '{key}' already set on {first}")]
    Duplicate {
        origin: Origin,
        key: String,
        first: Origin,
    },
    #[error("{origin}: '{key}' expects {expected}, got '{value}'")]
    Type {
        origin: Origin,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: Origin, message: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("{0}")]
    Validation(String),
}

/// The runnable commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Simulate,
    Ode,
    Sweep,
    VerifyTheorem1,
    MomentsCheck,
    Asymptotics,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::Ode,
        Command::Sweep,
        Command::VerifyTheorem1,
        Command::MomentsCheck,
        Command::Asymptotics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ode => "ode",
            Command::Sweep => "sweep",
            Command::VerifyTheorem1 => "verify-theorem1",
            Command::MomentsCheck => "moments-check",
            Command::Asymptotics => "asymptotics",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command '{s}'"))
    }
}

/// How list-valued axes combine into grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grid {
    /// Every combination.
    #[default]
    Product,
    /// The first value of every axis, plus each further value of one axis
    /// with the others at their first value.
    Star,
}

/// Every recognised key and its home section. `K`, `L`, `eta`, `sigma`,
/// `seed` and `dims` take lists.
pub const KEYS: &[(&str, &str)] = &[
    ("N", "model"),
    ("M", "model"),
    ("K", "model"),
    ("L", "model"),
    ("activation", "model"),
    ("mode", "model"),
    ("teacher_v", "model"),
    ("student_v", "model"),
    ("student_v_std", "model"),
    ("eta", "training"),
    ("eta_w", "training"),
    ("eta_v", "training"),
    ("sigma", "training"),
    ("weight_decay", "training"),
    ("batch", "training"),
    ("steps", "training"),
    ("alpha", "training"),
    ("seed", "training"),
    ("init", "training"),
    ("init_std", "training"),
    ("input", "training"),
    ("samples_per_dim", "training"),
    ("idx_path", "training"),
    ("order", "training"),
    ("record_every", "training"),
    ("integrator", "ode"),
    ("d_alpha", "ode"),
    ("with_ode", "ode"),
    ("grid", "sweep"),
    ("tail", "sweep"),
    ("dims", "theorem1"),
    ("seeds", "theorem1"),
    ("horizon", "theorem1"),
    ("resamples", "theorem1"),
    ("cases", "moments"),
    ("samples", "moments"),
    ("figure", "output"),
    ("output_dir", "output"),
];

/// Section names in the order they are written to manifests.
pub const SECTIONS: &[&str] = &[
    "model", "training", "ode", "sweep", "theorem1", "moments", "output",
];

fn home_section(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: String,
    pub origin: Origin,
}

/// Raw settings after merging file, arguments and preset, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, Setting>,
}

impl Settings {
    /// Parses configuration text. Every key must be known and set once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Settings::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        origin,
                        text: raw.trim().to_string(),
                    })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::UnknownSection {
                        origin,
                        section: name.to_string(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = split_pair(line, origin)?;
            let home = home_section(key).ok_or_else(|| ConfigError::UnknownKey {
                origin,
                key: key.to_string(),
            })?;
            if let Some(found) = &section {
                if found != home {
                    return Err(ConfigError::WrongSection {
                        origin,
                        key: key.to_string(),
                        expected: home,
                        found: found.clone(),
                    });
                }
            }
            if let Some(first) = out.map.get(key) {
                return Err(ConfigError::Duplicate {
                    origin,
                    key: key.to_string(),
                    first: first.origin,
                });
            }
            out.map.insert(
                key.to_string(),
                Setting {
                    value: value.to_string(),
                    origin,
                },
            );
        }
        Ok(out)
    }

    /// Applies `key=value` arguments on top, replacing earlier values.
    pub fn override_with<S: AsRef<str>>(&mut self, args: &[S]) -> Result<(), ConfigError> {
        for (i, arg) in args.iter().enumerate() {
            let origin = Origin::Argument(i + 1);
            let (key, value) = split_pair(arg.as_ref().trim(), origin)?;
            if home_section(key).is_none() {
                return Err(ConfigError::UnknownKey {
                    origin,
                    key: key.to_string(),
                });
            }
            self.map.insert(
                key.to_string(),
                Setting {
                    value: value.to_string(),
                    origin,
                },
            );
        }
        Ok(())
    }

    /// Fills in keys that are not set yet.
    pub fn fill_missing(&mut self, pairs: &[(&str, &str)], origin: Origin) {
        for (key, value) in pairs {
            self.map
                .entry((*key).to_string())
                .or_insert_with(|| Setting {
                    value: (*value).to_string(),
                    origin,
                });
        }
    }

    pub fn get(&self, key: &str) -> Option<&Setting> {
        self.map.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn typed<T: FromStr>(
        &self,
        key: &'static str,
        expected: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        let Some(s) = self.map.get(key) else {
            return Ok(None);
        };
        s.value
            .parse()
            .map(Some)
            .map_err(|_| type_error(key, expected, s))
    }

    fn list<T: FromStr>(
        &self,
        key: &'static str,
        expected: &'static str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(s) = self.map.get(key) else {
            return Ok(None);
        };
        let items: Vec<&str> = s.value.split(',').map(str::trim).collect();
        if items.iter().all(|v| v.is_empty()) {
            return Err(ConfigError::Invalid {
                origin: s.origin,
                message: format!("axis '{key}' is empty"),
            });
        }
        items
            .iter()
            .map(|v| v.parse().map_err(|_| type_error(key, expected, s)))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn origin(&self, key: &str) -> Option<Origin> {
        self.map.get(key).map(|s| s.origin)
    }

    /// Settings grouped by section in [`SECTIONS`] order, keys in [`KEYS`] order.
    pub fn by_section(&self) -> Vec<(&'static str, Vec<(&'static str, &str)>)> {
        SECTIONS
            .iter()
            .map(|&section| {
                let entries = KEYS
                    .iter()
                    .filter(|(_, home)| *home == section)
                    .filter_map(|(key, _)| self.map.get(*key).map(|s| (*key, s.value.as_str())))
                    .collect();
                (section, entries)
            })
            .filter(|(_, entries): &(_, Vec<_>)| !entries.is_empty())
            .collect()
    }
}

fn split_pair(line: &str, origin: Origin) -> Result<(&str, &str), ConfigError> {
    let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
        origin,
        text: line.to_string(),
    })?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || value.is_empty() {
        return Err(ConfigError::Syntax {
            origin,
            text: line.to_string(),
        });
    }
    Ok((key, value))
}

fn type_error(key: &'static str, expected: &'static str, s: &Setting) -> ConfigError {
    ConfigError::Type {
        origin: s.origin,
        key: key.to_string(),
        expected,
        value: s.value.clone(),
    }
}

/// Values swept over. Every axis holds at least one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub k: Vec<usize>,
    pub eta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Settings {
    pub dims: Vec<usize>,
    pub seeds: usize,
    pub horizon: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentsSettings {
    pub cases: usize,
    pub samples: usize,
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub figure: Option<Figure>,
    /// Every non-axis parameter; `student_units`, `eta_w`, `eta_v`, `sigma`
    /// and `seed` are set per grid point.
    pub base: TrainConfig,
    /// Explicit per-layer rates; otherwise both follow the `eta` axis.
    pub eta_w: Option<f64>,
    pub eta_v: Option<f64>,
    pub axes: Axes,
    pub grid: Grid,
    /// Record spacing in `alpha`.
    pub record_every: f64,
    /// Fraction of the run averaged into a sweep's `eg_final`; zero takes the last record.
    pub tail: f64,
    pub with_ode: bool,
    pub integrator: Integrator,
    pub d_alpha: f64,
    pub theorem1: Theorem1Settings,
    pub moments: MomentsSettings,
    pub output_dir: PathBuf,
    /// Resolved settings, written to the manifest.
    pub settings: Settings,
}

const DEFAULT_N: &str = "784";
/// Steps default to this many per input dimension.
const DEFAULT_ALPHA: f64 = 200.0;

/// Builds a spec from configuration text and argument overrides.
pub fn parse_config<S: AsRef<str>>(
    command: Command,
    text: &str,
    overrides: &[S],
) -> Result<ExperimentSpec, ConfigError> {
    let mut settings = Settings::parse(text)?;
    settings.override_with(overrides)?;
    resolve(command, settings)
}

fn resolve(command: Command, mut settings: Settings) -> Result<ExperimentSpec, ConfigError> {
    let figure = match settings.get("figure") {
        Some(s) => Some(
            s.value
                .parse::<Figure>()
                .map_err(|message| ConfigError::Invalid {
                    origin: s.origin,
                    message,
                })?,
        ),
        None => None,
    };
    if let Some(fig) = figure {
        if fig.command() != command {
            return Err(ConfigError::Validation(format!(
                "figure {fig} is produced by the '{}' command, not '{command}'",
                fig.command()
            )));
        }
        settings.fill_missing(fig.settings(), Origin::Preset(fig));
    }
    settings.fill_missing(&command_defaults(command), Origin::Default);
    if !settings.contains("K") && !settings.contains("L") {
        settings.fill_missing(&unit_defaults(command), Origin::Default);
    }

    let n: usize = settings
        .typed("N", "a positive integer")?
        .expect("N has a default");
    let m: usize = match settings.typed("M", "a positive integer")? {
        Some(m) => m,
        None => return Err(ConfigError::Missing("M")),
    };
    let k = match (
        settings.list::<usize>("K", "a list of positive integers")?,
        settings.list::<usize>("L", "a list of non-negative integers")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid {
                origin: settings.origin("L").expect("L is set"),
                message: "set either K or L, not both".into(),
            })
        }
        (Some(k), None) => k,
        (None, Some(l)) => l.iter().map(|l| m + l).collect(),
        (None, None) => return Err(ConfigError::Missing("K")),
    };
    if let Some(&bad) = k.iter().find(|&&k| k == 0) {
        return Err(ConfigError::Invalid {
            origin: settings
                .origin("K")
                .or(settings.origin("L"))
                .expect("K or L is set"),
            message: format!("K must be positive, got {bad}"),
        });
    }
    let activation: ActivationKind = settings
        .typed("activation", "erf, relu or linear")?
        .expect("default");
    let mode: Mode = settings.typed("mode", "scm or both")?.expect("default");
    let eta: Vec<f64> = settings.list("eta", "a list of numbers")?.expect("default");
    let sigma: Vec<f64> = settings
        .list("sigma", "a list of numbers")?
        .expect("default");
    let seed: Vec<u64> = settings
        .list("seed", "a list of non-negative integers")?
        .expect("default");

    let mut base = TrainConfig::new(n, m, k[0], activation).with_mode(mode);
    base.eta_w = eta[0];
    base.eta_v = eta[0];
    base.sigma = sigma[0];
    base.seed = seed[0];
    if let Some(v) = settings.typed("teacher_v", "a number")? {
        base.teacher_v = v;
    }
    if let Some(v) = settings.typed("student_v", "a number")? {
        base.student_v = v;
    }
    if let Some(v) = settings.typed("student_v_std", "a number")? {
        base.student_v_std = v;
    }
    if let Some(v) = settings.typed("weight_decay", "a number")? {
        base.weight_decay = v;
    }
    if let Some(v) = settings.typed("batch", "a positive integer")? {
        base.batch = v;
    }
    base.steps = match (
        settings.typed::<u64>("steps", "a non-negative integer")?,
        settings.typed::<f64>("alpha", "a number")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid {
                origin: settings.origin("alpha").expect("alpha is set"),
                message: "set either steps or alpha, not both".into(),
            })
        }
        (Some(steps), None) => steps,
        (None, Some(alpha)) => {
            positive_steps(alpha, n, settings.origin("alpha").expect("alpha is set"))?
        }
        (None, None) => (DEFAULT_ALPHA * n as f64) as u64,
    };
    base.init = init_scheme(&settings)?;
    base.input_source = input_source(&settings)?;

    let spec = ExperimentSpec {
        command,
        figure,
        eta_w: settings.typed("eta_w", "a number")?,
        eta_v: settings.typed("eta_v", "a number")?,
        axes: Axes {
            k,
            eta,
            sigma,
            seed,
        },
        grid: match settings.get("grid").map(|s| (s.value.as_str(), s.origin)) {
            None | Some(("product", _)) => Grid::Product,
            Some(("star", _)) => Grid::Star,
            Some((other, origin)) => {
                return Err(ConfigError::Type {
                    origin,
                    key: "grid".into(),
                    expected: "product or star",
                    value: other.into(),
                })
            }
        },
        record_every: settings
            .typed("record_every", "a number")?
            .expect("default"),
        tail: settings.typed("tail", "a number")?.expect("default"),
        with_ode: settings
            .typed("with_ode", "true or false")?
            .expect("default"),
        integrator: match settings
            .get("integrator")
            .map(|s| (s.value.as_str(), s.origin))
        {
            Some(("euler", _)) => Integrator::Euler,
            None | Some(("rk4", _)) => Integrator::Rk4,
            Some((other, origin)) => {
                return Err(ConfigError::Type {
                    origin,
                    key: "integrator".into(),
                    expected: "euler or rk4",
                    value: other.into(),
                })
            }
        },
        d_alpha: settings.typed("d_alpha", "a number")?.expect("default"),
        theorem1: Theorem1Settings {
            dims: settings
                .list("dims", "a list of positive integers")?
                .expect("default"),
            seeds: settings
                .typed("seeds", "a positive integer")?
                .expect("default"),
            horizon: settings.typed("horizon", "a number")?.expect("default"),
            resamples: settings
                .typed("resamples", "a positive integer")?
                .expect("default"),
        },
        moments: MomentsSettings {
            cases: settings
                .typed("cases", "a positive integer")?
                .expect("default"),
            samples: settings
                .typed("samples", "a positive integer")?
                .expect("default"),
        },
        output_dir: PathBuf::from(&settings.get("output_dir").expect("default").value),
        base,
        settings,
    };
    validate(&spec)?;
    Ok(spec)
}

fn command_defaults(command: Command) -> Vec<(&'static str, &'static str)> {
    let mut out = vec![
        ("N", DEFAULT_N),
        ("activation", "erf"),
        ("mode", "scm"),
        ("eta", "0.1"),
        ("sigma", "0"),
        ("seed", "0"),
        ("record_every", "1"),
        ("tail", "0"),
        ("with_ode", "false"),
        ("d_alpha", "0.01"),
        ("dims", "250,1000,4000"),
        ("seeds", "10"),
        ("horizon", "10"),
        ("resamples", "1000"),
        ("cases", "100"),
        ("samples", "1000000"),
        ("output_dir", "out"),
    ];
    match command {
        Command::Asymptotics | Command::MomentsCheck => out.push(("M", "1")),
        Command::VerifyTheorem1 => out.push(("M", "2")),
        Command::Simulate | Command::Ode | Command::Sweep => {}
    }
    out
}

/// Student size used when neither `K` nor `L` is given.
fn unit_defaults(command: Command) -> Vec<(&'static str, &'static str)> {
    match command {
        Command::Asymptotics | Command::MomentsCheck => vec![("L", "0")],
        Command::VerifyTheorem1 => vec![("K", "2")],
        Command::Simulate | Command::Ode | Command::Sweep => vec![],
    }
}

fn positive_steps(alpha: f64, n: usize, origin: Origin) -> Result<u64, ConfigError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(ConfigError::Invalid {
            origin,
            message: format!("alpha must be non-negative, got {alpha}"),
        });
    }
    Ok((alpha * n as f64).round() as u64)
}

fn init_scheme(settings: &Settings) -> Result<InitScheme, ConfigError> {
    let std: Option<f64> = settings.typed("init_std", "a number")?;
    let Some(s) = settings.get("init") else {
        return Ok(std.map_or(InitScheme::Default, |std| InitScheme::Normal { std }));
    };
    match s.value.as_str() {
        "default" => Ok(InitScheme::Default),
        "normal" => Ok(InitScheme::Normal {
            std: std.ok_or(ConfigError::Missing("init_std"))?,
        }),
        "specialised" => Ok(InitScheme::Specialised {
            surplus_std: std.unwrap_or(0.0),
        }),
        "groups" => Ok(InitScheme::Groups),
        _ => Err(type_error(
            "init",
            "default, normal, specialised or groups",
            s,
        )),
    }
}

fn input_source(settings: &Settings) -> Result<InputSourceSpec, ConfigError> {
    let order = match settings.get("order") {
        None => EpochOrder::default(),
        Some(s) if s.value == "sequential" => EpochOrder::Sequential,
        Some(s) if s.value == "shuffled" => EpochOrder::Shuffled,
        Some(s) => return Err(type_error("order", "sequential or shuffled", s)),
    };
    match settings.get("input").map(|s| s.value.as_str()) {
        None | Some("gaussian") => Ok(InputSourceSpec::GaussianStream),
        Some("fixed") => Ok(InputSourceSpec::FixedSet {
            samples_per_dim: settings
                .typed("samples_per_dim", "a positive integer")?
                .ok_or(ConfigError::Missing("samples_per_dim"))?,
            order,
        }),
        Some("idx") => Ok(InputSourceSpec::IdxFile {
            path: PathBuf::from(
                &settings
                    .get("idx_path")
                    .ok_or(ConfigError::Missing("idx_path"))?
                    .value,
            ),
            order,
        }),
        Some(_) => Err(type_error(
            "input",
            "gaussian, fixed or idx",
            settings.get("input").expect("input is set"),
        )),
    }
}

fn validate(spec: &ExperimentSpec) -> Result<(), ConfigError> {
    let bad = |origin: Option<Origin>, message: String| match origin {
        Some(origin) => ConfigError::Invalid { origin, message },
        None => ConfigError::Validation(message),
    };
    let s = &spec.settings;
    spec.base
        .validated()
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    for (key, values) in [("eta", &spec.axes.eta), ("sigma", &spec.axes.sigma)] {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(bad(
                s.origin(key),
                format!("{key} must be finite and non-negative, got {v}"),
            ));
        }
    }
    for (key, v) in [("eta_w", spec.eta_w), ("eta_v", spec.eta_v)] {
        if let Some(v) = v.filter(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(bad(
                s.origin(key),
                format!("{key} must be finite and non-negative, got {v}"),
            ));
        }
    }
    if !(spec.record_every.is_finite() && spec.record_every > 0.0) {
        return Err(bad(
            s.origin("record_every"),
            "record_every must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.tail) {
        return Err(bad(s.origin("tail"), "tail must lie in [0, 1]".into()));
    }
    if !(spec.d_alpha.is_finite() && spec.d_alpha > 0.0) {
        return Err(bad(s.origin("d_alpha"), "d_alpha must be positive".into()));
    }
    let t = &spec.theorem1;
    if spec.command == Command::VerifyTheorem1 {
        if t.dims.len() < 3 {
            return Err(bad(
                s.origin("dims"),
                format!("need at least 3 values of N, got {}", t.dims.len()),
            ));
        }
        let (lo, hi) = (
            t.dims.iter().min().copied().unwrap_or(0),
            t.dims.iter().max().copied().unwrap_or(0),
        );
        if lo == 0 || hi < 10 * lo {
            return Err(bad(
                s.origin("dims"),
                "the values of N must be positive and span at least a decade".into(),
            ));
        }
    }
    if t.seeds == 0 || t.resamples == 0 || !(t.horizon.is_finite() && t.horizon >= 0.0) {
        return Err(ConfigError::Validation(
            "theorem1 needs seeds >= 1, resamples >= 1 and horizon >= 0".into(),
        ));
    }
    if spec.moments.cases == 0 || spec.moments.samples < 1000 {
        return Err(ConfigError::Validation(
            "moments needs cases >= 1 and samples >= 1000".into(),
        ));
    }
    Ok(())
}
