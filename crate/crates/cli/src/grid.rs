//! Expansion of the sweep axes into grid points.

use committee_flow::rng::derive_seed;
use committee_flow::TrainConfig;

use crate::config::{ExperimentSpec, Grid};

/// One combination of axis values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Position of `(K, eta, sigma)` among the seedless combinations.
    pub index: usize,
    pub k: usize,
    pub eta: f64,
    pub sigma: f64,
    /// Master seed from the `seed` axis.
    pub seed: u64,
}

impl GridPoint {
    /// Seed of the run at this point: `derive_seed(seed, index)`.
    pub fn run_seed(&self) -> u64 {
        derive_seed(self.seed, self.index as u64)
    }

    /// Training configuration of this point. Explicit `eta_w`/`eta_v` take
    /// precedence over the `eta` axis.
    pub fn train_config(&self, spec: &ExperimentSpec) -> TrainConfig {
        let mut cfg = spec.base.clone();
        cfg.student_units = self.k;
        cfg.eta_w = spec.eta_w.unwrap_or(self.eta);
        cfg.eta_v = spec.eta_v.unwrap_or(self.eta);
        cfg.sigma = self.sigma;
        cfg.seed = self.run_seed();
        cfg
    }

    pub fn label(&self) -> String {
        format!(
            "K={} eta={} sigma={} seed={}",
            self.k, self.eta, self.sigma, self.seed
        )
    }
}

/// Grid points in a fixed order: `K` outermost, then `eta`, `sigma`, `seed`.
pub fn grid_points(spec: &ExperimentSpec) -> Vec<GridPoint> {
    let a = &spec.axes;
    let combos: Vec<(usize, f64, f64)> = match spec.grid {
        Grid::Product => {
            a.k.iter()
                .flat_map(|&k| {
                    a.eta
                        .iter()
                        .flat_map(move |&eta| a.sigma.iter().map(move |&sigma| (k, eta, sigma)))
                })
                .collect()
        }
        Grid::Star => {
            let (k0, eta0, sigma0) = (a.k[0], a.eta[0], a.sigma[0]);
            let mut out = vec![(k0, eta0, sigma0)];
            out.extend(a.k[1..].iter().map(|&k| (k, eta0, sigma0)));
            out.extend(a.eta[1..].iter().map(|&eta| (k0, eta, sigma0)));
            out.extend(a.sigma[1..].iter().map(|&sigma| (k0, eta0, sigma)));
            out
        }
    };
    combos
        .into_iter()
        .enumerate()
        .flat_map(|(index, (k, eta, sigma))| {
            a.seed.iter().map(move |&seed| GridPoint {
                index,
                k,
                eta,
                sigma,
                seed,
            })
        })
        .collect()
}
