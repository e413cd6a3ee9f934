//! Run configuration: TOML or JSON file, `HEATLMI_` environment overrides, CLI flags.

use std::path::{Path, PathBuf};

use heatlmi_core::modal::select_n0;
use heatlmi_core::sim::{SimConfig, Sampling};
use heatlmi_core::{SolveOptions, SystemConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Prefix of environment overrides. `HEATLMI_SYSTEM__N=6` sets `system.n`.
pub const ENV_PREFIX: &str = "HEATLMI_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub a: f64,
    pub x_star: f64,
    pub delta: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub tau_my: f64,
    pub tau_mu: f64,
    /// Chosen from `a` and `delta` when absent.
    pub n0: Option<usize>,
    pub n: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        let s = SystemConfig::default();
        Self {
            a: s.a,
            x_star: s.x_star,
            delta: s.delta,
            delta0: s.delta0,
            delta1: s.delta1,
            tau_my: s.tau_my,
            tau_mu: s.tau_mu,
            n0: None,
            n: s.n,
        }
    }
}

impl SystemSection {
    pub fn resolved_n0(&self) -> usize {
        self.n0.unwrap_or_else(|| select_n0(self.a, self.delta))
    }

    pub fn to_system(&self) -> SystemConfig {
        SystemConfig {
            a: self.a,
            x_star: self.x_star,
            delta: self.delta,
            delta0: self.delta0,
            delta1: self.delta1,
            tau_my: self.tau_my,
            tau_mu: self.tau_mu,
            n0: self.resolved_n0(),
            n: self.n,
        }
    }
}

/// Where gains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainSource {
    /// The published `L0 = 0.7062`, `K0 = [-4.8237, -5.2287]` (requires `N0 = 1`).
    Printed,
    /// Designed by the LMI synthesis.
    Designed,
    /// A gains JSON file written by `design`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    pub source: GainSource,
    /// Required Lyapunov margin for designed gains.
    pub margin: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        Self {
            source: GainSource::Printed,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Continuous,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub mode: VerifyMode,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            mode: VerifyMode::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Observer dimensions (table columns).
    pub n: Vec<usize>,
    /// Measurement bounds (table rows).
    pub tau_y: Vec<f64>,
    pub grid_step: f64,
    pub max_tau: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n: vec![6, 8, 10, 12, 14],
            tau_y: (1..=8).map(|k| (k as f64 * 0.002 * 1e9).round() / 1e9).collect(),
            grid_step: 0.001,
            max_tau: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Sweep worker count; 0 uses every core.
    pub jobs: usize,
    /// Replaces the jittered-sampling seed when set.
    pub seed: Option<u64>,
    pub system: SystemSection,
    pub gains: GainsSection,
    pub solver: SolveOptions,
    pub verify: VerifySection,
    pub sweep: SweepSection,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("heatlmi-out"),
            jobs: 4,
            seed: None,
            system: SystemSection::default(),
            gains: GainsSection::default(),
            solver: SolveOptions::default(),
            verify: VerifySection::default(),
            sweep: SweepSection::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Command-line values that take precedence over file and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Reads `path` (JSON if it ends in `.json`, TOML otherwise), then applies `env` and `flags`.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: &Overrides,
    ) -> Result<Self, CliError> {
        let mut value = match path {
            None => Value::Object(Default::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                parse_document(&text, p.extension().is_some_and(|e| e == "json"))?
            }
        };
        for (key, raw) in env {
            if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
                apply_override(&mut value, rest, &raw)?;
            }
        }
        let mut cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
        if let Some(out) = &flags.out {
            cfg.out = out.clone();
        }
        if let Some(j) = flags.jobs {
            cfg.jobs = j;
        }
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        cfg.resolve();
        Ok(cfg)
    }

    /// Materializes derived defaults so the echoed configuration is complete.
    pub fn resolve(&mut self) {
        self.system.n0 = Some(self.system.resolved_n0());
        if let (Some(seed), Sampling::Jittered { seed: s, .. }) = (self.seed, &mut self.sim.sampling) {
            *s = seed;
        }
        if self.sim.modes.is_none() {
            self.sim.modes = Some(self.sim.modes_for(self.system.n));
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot encode configuration: {e}")))
    }
}

fn parse_document(text: &str, json: bool) -> Result<Value, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON configuration: {e}")))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML configuration: {e}")))
    }
}

/// `SECTION__KEY` (case-insensitive) set to `raw`, parsed as JSON when possible.
fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("malformed override {ENV_PREFIX}{key}")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, part) in path.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(CliError::Config(format!("override {ENV_PREFIX}{key} does not address a table")));
        };
        if i + 1 == path.len() {
            map.insert(part.clone(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str, json: bool, env: Vec<(&str, &str)>) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(if json { "c.json" } else { "c.toml" });
        std::fs::write(&p, text).unwrap();
        RunConfig::load(
            Some(&p),
            env.into_iter().map(|(k, v)| (k.to_string(), v.to_string())),
            &Overrides::default(),
        )
    }

    #[test]
    fn defaults_are_materialized() {
        let c = load_str("", false, vec![]).unwrap();
        assert_eq!(c.system.n0, Some(1));
        assert_eq!(c.sim.modes, Some(100));
        let again: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load_str("[system]\nbogus = 1\n", false, vec![]).is_err());
        assert!(load_str("{\"nope\": 2}", true, vec![]).is_err());
    }

    #[test]
    fn environment_overrides_file() {
        let c = load_str(
            "[system]\nn = 4\n",
            false,
            vec![("HEATLMI_SYSTEM__N", "6"), ("HEATLMI_GAINS__SOURCE", "designed"), ("OTHER", "x")],
        )
        .unwrap();
        assert_eq!(c.system.n, 6);
        assert_eq!(c.gains.source, GainSource::Designed);
    }

    #[test]
    fn json_and_toml_agree() {
        let t = load_str("jobs = 2\n[sweep]\nn = [6]\ntau_y = [0.002]\n", false, vec![]).unwrap();
        let j = load_str(r#"{"jobs": 2, "sweep": {"n": [6], "tau_y": [0.002]}}"#, true, vec![]).unwrap();
        assert_eq!(t, j);
    }

    #[test]
    fn seed_flag_reaches_jittered_sampling() {
        let mut c = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        c.sim.sampling = Sampling::Jittered { tau_y: 0.002, tau_u: 0.04, seed: 1 };
        c.resolve();
        assert_eq!(c.sim.sampling, Sampling::Jittered { tau_y: 0.002, tau_u: 0.04, seed: 9 });
    }
}
