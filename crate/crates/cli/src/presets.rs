//! Figure presets: named parameter sets applied beneath explicit settings.

use std::fmt;
use std::str::FromStr;

use crate::config::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Simulated and integrated error curves side by side, erf SCM, `M = 4`.
    Fig1b,
    /// Late-time erf SCM error against the number of surplus units.
    Fig2a,
    /// Late-time both-layers error against `K`.
    Fig3c,
    /// ReLU SCM late-time error around one base point in `eta`, `sigma` and `L`.
    FigS4,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig1b, Figure::Fig2a, Figure::Fig3c, Figure::FigS4];

    pub fn tag(self) -> &'static str {
        match self {
            Figure::Fig1b => "fig1b",
            Figure::Fig2a => "fig2a",
            Figure::Fig3c => "fig3c",
            Figure::FigS4 => "figS4",
        }
    }

    pub fn command(self) -> Command {
        match self {
            Figure::Fig1b => Command::Simulate,
            Figure::Fig2a | Figure::Fig3c | Figure::FigS4 => Command::Sweep,
        }
    }

    pub fn settings(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Figure::Fig1b => &[
                ("N", "784"),
                ("M", "4"),
                ("K", "2,3,4,5,6"),
                ("activation", "erf"),
                ("eta", "0.2"),
                ("sigma", "0"),
                ("alpha", "100"),
                ("record_every", "0.1"),
                ("with_ode", "true"),
                ("integrator", "rk4"),
                ("d_alpha", "0.01"),
            ],
            Figure::Fig2a => &[
                ("N", "784"),
                ("M", "2"),
                ("L", "0,1,2,3,4"),
                ("activation", "erf"),
                ("eta", "0.05"),
                ("sigma", "0.01"),
                ("seed", "0,1,2,3,4"),
                ("init", "specialised"),
                ("init_std", "0"),
                ("alpha", "300"),
                ("tail", "0.67"),
            ],
            Figure::Fig3c => &[
                ("N", "784"),
                ("M", "2"),
                ("K", "2,3,4,5"),
                ("activation", "erf"),
                ("mode", "both"),
                ("teacher_v", "2"),
                ("eta", "0.01"),
                ("sigma", "0.01"),
                ("seed", "0,1,2"),
                ("init", "groups"),
                ("alpha", "1500"),
                ("tail", "0.5"),
            ],
            Figure::FigS4 => &[
                ("N", "784"),
                ("M", "4"),
                ("L", "4,1,2,8,12"),
                ("activation", "relu"),
                ("eta", "0.1,0.025,0.05"),
                ("sigma", "0.1,0.05,0.2"),
                ("grid", "star"),
                ("alpha", "3000"),
                ("record_every", "0.5"),
                ("tail", "0.5"),
            ],
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Figure::ALL
            .into_iter()
            .find(|fig| fig.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<&str> = Figure::ALL.iter().map(|f| f.tag()).collect();
                format!("unknown figure '{s}' (known: {})", known.join(", "))
            })
    }
}
