//! Measurement and hold-update instants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How the observer sees the output and how the control derivative is updated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Sampling {
    Continuous,
    /// Constant increments `tau_y`, `tau_u`.
    Uniform { tau_y: f64, tau_u: f64 },
    /// Increments `τ · U[0.5, 1]` drawn independently for each sequence.
    Jittered {
        tau_y: f64,
        tau_u: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Given instants `s` (measurement) and `t` (hold update), both starting at 0.
    Explicit {
        tau_y: f64,
        tau_u: f64,
        s: Vec<f64>,
        t: Vec<f64>,
    },
}

impl Sampling {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Sampling::Continuous)
    }

    /// Declared bounds `(τ_{M,y}, τ_{M,u})`.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Sampling::Continuous => None,
            Sampling::Uniform { tau_y, tau_u }
            | Sampling::Jittered { tau_y, tau_u, .. }
            | Sampling::Explicit { tau_y, tau_u, .. } => Some((*tau_y, *tau_u)),
        }
    }

    /// Measurement and update instants in `[0, horizon)`.
    pub fn instants(&self, horizon: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let out = match self {
            Sampling::Continuous => return Ok(None),
            Sampling::Uniform { tau_y, tau_u } => {
                check_bound(*tau_y)?;
                check_bound(*tau_u)?;
                (uniform(*tau_y, horizon), uniform(*tau_u, horizon))
            }
            Sampling::Jittered { tau_y, tau_u, seed } => {
                check_bound(*tau_y)?;
                check_bound(*tau_u)?;
                let mut ry = ChaCha8Rng::seed_from_u64(*seed);
                let mut ru = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
                (jittered(*tau_y, horizon, &mut ry), jittered(*tau_u, horizon, &mut ru))
            }
            Sampling::Explicit { tau_y, tau_u, s, t } => {
                check_sequence(s, *tau_y, horizon, "measurement")?;
                check_sequence(t, *tau_u, horizon, "update")?;
                (
                    s.iter().copied().filter(|v| *v < horizon).collect(),
                    t.iter().copied().filter(|v| *v < horizon).collect(),
                )
            }
        };
        Ok(Some(out))
    }
}

fn check_bound(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("sampling bound {tau} must be positive")));
    }
    Ok(())
}

fn uniform(tau: f64, horizon: f64) -> Vec<f64> {
    (0..)
        .map(|k| k as f64 * tau)
        .take_while(|t| *t < horizon)
        .collect()
}

fn jittered(tau: f64, horizon: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut t = 0.0;
    loop {
        t += tau * rng.random_range(0.5..=1.0);
        if t >= horizon {
            break;
        }
        out.push(t);
    }
    out
}

fn check_sequence(seq: &[f64], tau: f64, horizon: f64, what: &str) -> Result<()> {
    check_bound(tau)?;
    if seq.first() != Some(&0.0) {
        return Err(invalid(format!("{what} instants must start at 0")));
    }
    let slack = 1e-12 * (1.0 + tau);
    for pair in seq.windows(2) {
        let inc = pair[1] - pair[0];
        if !(inc > 0.0) {
            return Err(invalid(format!(
                "{what} instants must be strictly increasing ({} then {})",
                pair[0], pair[1]
            )));
        }
        if inc > tau + slack {
            return Err(invalid(format!(
                "{what} increment {inc} at {} exceeds bound {tau}",
                pair[0]
            )));
        }
    }
    let last = *seq.last().unwrap();
    if last < horizon && horizon - last > tau + slack {
        return Err(invalid(format!(
            "{what} instants end at {last}, leaving a gap above {tau} before the horizon {horizon}"
        )));
    }
    Ok(())
}
