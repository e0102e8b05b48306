use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Hidden-unit nonlinearity shared by teacher and student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// `g(x) = erf(x / sqrt 2)`.
    Erf,
    /// `g(x) = max(x, 0)`, with `g'(0) = 0`.
    Relu,
    /// `g(x) = x`.
    Linear,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [Self::Erf, Self::Relu, Self::Linear];

    #[inline]
    pub fn g(self, x: f64) -> f64 {
        match self {
            Self::Erf => libm::erf(x * FRAC_1_SQRT_2),
            Self::Relu => x.max(0.0),
            Self::Linear => x,
        }
    }

    #[inline]
    pub fn g_prime(self, x: f64) -> f64 {
        match self {
            Self::Erf => (2.0 / PI).sqrt() * (-0.5 * x * x).exp(),
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Erf => "erf",
            Self::Relu => "relu",
            Self::Linear => "linear",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "erf" | "sigmoidal" => Ok(Self::Erf),
            "relu" => Ok(Self::Relu),
            "linear" | "lin" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}
