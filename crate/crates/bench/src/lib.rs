//! Shared fixtures for the criterion benches.

use heatlmi_core::sim::{Sampling, SimConfig};
use heatlmi_core::{GainSet, ModalModel, SystemConfig};

/// Reference model of dimension `n` with the printed gains.
pub fn reference(n: usize) -> (ModalModel, GainSet) {
    let model = ModalModel::new(&SystemConfig {
        n,
        ..SystemConfig::default()
    })
    .expect("reference configuration is valid");
    let gains = GainSet::reference(&model).expect("printed gains fit N0 = 1");
    (model, gains)
}

pub fn continuous_run(horizon: f64) -> SimConfig {
    SimConfig {
        horizon,
        ..SimConfig::default()
    }
}

pub fn jittered_run(horizon: f64) -> SimConfig {
    SimConfig {
        horizon,
        sampling: Sampling::Jittered {
            tau_y: 0.002,
            tau_u: 0.048,
            seed: 1,
        },
        ..SimConfig::default()
    }
}
