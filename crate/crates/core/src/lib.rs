//! Online SGD for two-layer teacher-student networks and the order-parameter
//! dynamics that describe it as the input dimension grows.
//!
//! - [`moments`]: Gaussian expectations of activation products.
//! - [`sgd`]: the microscopic SGD chain with order-parameter recording.
//! - [`ode`]: the macroscopic ODEs, their reductions and the perturbative
//!   asymptotic solver.
//! - [`asymptotics`]: closed-form asymptotic errors and stability thresholds.
//! - [`stats`]: log-log fits used by the scaling checks.

pub mod activation;
pub mod asymptotics;
pub mod config;
pub mod error;
pub mod gen_error;
pub mod macro_state;
pub mod moments;
pub mod network;
pub mod ode;
pub mod rng;
pub mod sgd;
pub mod stats;

pub use activation::ActivationKind;
pub use config::{EpochOrder, InitScheme, InputSourceSpec, Mode, TrainConfig};
pub use error::{Error, Result};
pub use gen_error::gen_error_analytic;
pub use macro_state::{measure_macro, MacroState};
pub use network::NetworkParams;
