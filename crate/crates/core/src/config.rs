//! Experiment configuration: built-in profiles, TOML files and dotted
//! `key=value` overrides, merged in that order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::diffnet::OptimizerKind;
use crate::env::{EnvConfig, OracleGridSpec};
use crate::error::{Error, Result};
use crate::harness::PhasePlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Scaled-down experiment that finishes on a workstation.
    Desk,
    /// Full-length experiment.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub grid: OracleGridSpec,
    /// Seed of the train/test/validation split, shared by every run.
    pub split_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub plan: PhasePlan,
    pub oracle: OracleSettings,
    /// Runs per variant; seeds are `1..=runs`.
    pub runs: u64,
    /// Per-test significance level of the variant comparison.
    pub alpha: f64,
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Full => Self {
                env: EnvConfig::default(),
                agent: AgentConfig::default(),
                plan: PhasePlan::default(),
                oracle: OracleSettings { grid: OracleGridSpec::full(), split_seed: 0 },
                runs: 128,
                alpha: 0.025,
            },
            Profile::Desk => {
                let mut agent = AgentConfig::default();
                agent.optimizer = OptimizerKind::Adam;
                Self {
                    env: EnvConfig::default(),
                    agent,
                    plan: PhasePlan {
                        dap_steps: 3000,
                        postdap_epochs: 3000,
                        batch_size: 32,
                        plateau_window: 300,
                        oracle_epochs: 6000,
                        ..PhasePlan::default()
                    },
                    oracle: OracleSettings { grid: OracleGridSpec::desk(), split_seed: 0 },
                    runs: 16,
                    alpha: 0.025,
                }
            }
        }
    }

    /// Profile defaults, then the optional TOML file, then each `key=value`.
    pub fn load(profile: Profile, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match file {
            Some(p) => Some(
                std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        Self::from_parts(profile, text.as_deref(), overrides)
    }

    pub fn from_parts(profile: Profile, toml_text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut tree = serde_json::to_value(Self::profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(text) = toml_text {
            let file: toml::Value = toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
            let file = serde_json::to_value(file).map_err(|e| Error::Config(e.to_string()))?;
            merge(&mut tree, file);
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Self = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.plan.validate()?;
        if self.oracle.grid.counts.iter().any(|c| *c == 0) {
            return Err(Error::Config("oracle grid counts must be positive".into()));
        }
        if self.runs == 0 || !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("runs must be positive and alpha in (0, 1)".into()));
        }
        Ok(())
    }

    /// Agent settings with the plan's batch size applied.
    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig { batch_size: self.plan.batch_size, ..self.agent.clone() }
    }

    /// Canonical JSON of the whole configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.canonical_json().as_bytes())[..8])
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `a.b.c=value`. Values are read as TOML literals (numbers, booleans,
/// arrays, quoted strings); `none` clears an optional setting and anything
/// else is taken as a bare string.
fn apply_override(tree: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form key=value")))?;
    let raw = raw.trim();
    let value = if raw == "none" {
        Value::Null
    } else {
        match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => serde_json::to_value(t.remove("v").expect("parsed key")).map_err(|e| Error::Config(e.to_string()))?,
            Err(_) => Value::String(raw.to_string()),
        }
    };
    let mut slot = tree;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {:?} is not a table", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(Error::Config(format!("override {key:?}: unknown key {part:?}")));
        }
        slot = obj.get_mut(*part).expect("checked");
    }
    *slot = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_are_valid_and_distinct() {
        let d = ExperimentConfig::profile(Profile::Desk);
        let f = ExperimentConfig::profile(Profile::Full);
        d.validate().unwrap();
        f.validate().unwrap();
        assert_eq!((d.plan.dap_steps, d.plan.postdap_epochs, d.runs), (3000, 3000, 16));
        assert_eq!((f.plan.dap_steps, f.plan.postdap_epochs, f.runs), (30_000, 30_000, 128));
        assert_ne!(d.hash(), f.hash());
        assert_eq!(d.hash().len(), 16);
    }

    #[test]
    fn file_then_overrides() {
        let text = "runs = 3\n[agent]\ngamma = 0.5\n[agent.rates]\nap = 0.01\n";
        let sets = vec!["agent.gamma=0.7".to_string(), "plan.dap_steps=10".to_string(), "agent.grad_clip=none".to_string()];
        let c = ExperimentConfig::from_parts(Profile::Desk, Some(text), &sets).unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.agent.gamma, 0.7);
        assert_eq!(c.agent.rates.ap, 0.01);
        assert_eq!(c.agent.rates.fm, ExperimentConfig::profile(Profile::Desk).agent.rates.fm);
        assert_eq!(c.plan.dap_steps, 10);
        assert_eq!(c.agent.grad_clip, None);
        let c2 = ExperimentConfig::from_parts(Profile::Desk, Some(text), &sets).unwrap();
        assert_eq!(c.hash(), c2.hash());
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for sets in [vec!["agent.gama=0.7"], vec!["agent.gamma"], vec!["agent.gamma=2.0"], vec!["runs=\"x\""]] {
            let sets: Vec<String> = sets.into_iter().map(String::from).collect();
            let e = ExperimentConfig::from_parts(Profile::Desk, None, &sets).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{e}");
        }
        let e = ExperimentConfig::from_parts(Profile::Desk, Some("[agent]\nbogus = 1\n"), &[]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(ExperimentConfig::from_parts(Profile::Desk, Some("not toml ="), &[]).is_err());
    }

    #[test]
    fn optimizer_override_parses_as_string() {
        let c = ExperimentConfig::from_parts(Profile::Desk, None, &["agent.optimizer=sgd".to_string()]).unwrap();
        assert_eq!(c.agent.optimizer, OptimizerKind::Sgd);
    }
}
