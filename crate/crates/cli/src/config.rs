//! Sectioned TOML configuration with `MEDEVAL_<SECTION>_<KEY>` environment overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const ENV_PREFIX: &str = "MEDEVAL_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub ingest: IngestConfig,
    pub split: SplitConfig,
    pub probe: ProbeConfig,
    pub metrics: MetricsConfig,
    pub rate: RateConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    /// Slice window as `LO:HI` in HU.
    pub window: String,
    pub target: u32,
    pub data_root: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            window: "-1400:100".into(),
            target: 768,
            data_root: ".".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub w_ratio: f64,
    pub w_qtype: f64,
    pub w_size: f64,
    pub budget: u64,
    pub restarts: usize,
    pub group_patients: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            w_ratio: 1.0,
            w_qtype: 1.0,
            w_size: 0.5,
            budget: 200_000,
            restarts: 4,
            group_patients: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub ladder_floor: usize,
    pub lars_epochs: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            replicates: 10_000,
            alpha: 0.05,
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            ladder_floor: 64,
            lars_epochs: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub set: String,
    /// `default` or `no-articles`.
    pub normalize: String,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            set: "bleu4,rougeL,cider,tokf1,em".into(),
            normalize: "default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub threshold: f64,
    pub specialists: Vec<String>,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            threshold: 0.2,
            specialists: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Directory of static rater UI assets; empty disables static serving.
    pub ui_dir: String,
    /// Write a JSON snapshot of current ratings every this many accepted ratings.
    pub snapshot_every: usize,
    /// Reader id → bearer token. Empty means no token check.
    pub tokens: BTreeMap<String, String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            ui_dir: String::new(),
            snapshot_every: 25,
            tokens: BTreeMap::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Read(String, std::io::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Interpret an environment value as a TOML value, falling back to a plain string.
fn env_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_env(table: &mut toml::Table, vars: &[(String, String)]) -> Result<(), ConfigError> {
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        if rest == "seed" {
            table.insert("seed".into(), env_value(raw));
            continue;
        }
        let (section, field) = rest
            .split_once('_')
            .ok_or_else(|| ConfigError::Invalid(format!("environment override {key} names no section")))?;
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(section_table) = entry else {
            return Err(ConfigError::Invalid(format!("{section} is not a section")));
        };
        section_table.insert(field.to_string(), env_value(raw));
    }
    Ok(())
}

impl PipelineConfig {
    /// Defaults, then the file (if any), then `MEDEVAL_*` variables from `vars`.
    pub fn resolve(path: Option<&Path>, vars: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read(p.display().to_string(), e))?;
                text.parse::<toml::Table>().map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        apply_env(&mut table, vars)?;
        let config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        let vars: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        Self::resolve(path, &vars)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.probe;
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(ConfigError::Invalid(format!("probe.alpha {} not in (0, 1)", p.alpha)));
        }
        if p.replicates == 0 || p.lambda_grid.is_empty() || p.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(ConfigError::Invalid("probe.replicates and probe.lambda_grid must be positive".into()));
        }
        let s = &self.split;
        if [s.w_ratio, s.w_qtype, s.w_size].iter().any(|w| !(*w >= 0.0)) {
            return Err(ConfigError::Invalid("split weights must be non-negative".into()));
        }
        if !matches!(self.metrics.normalize.as_str(), "default" | "no-articles") {
            return Err(ConfigError::Invalid(format!("metrics.normalize `{}`", self.metrics.normalize)));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON of the resolved config.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn defaults_and_env_overrides() {
        let c = PipelineConfig::resolve(None, &[]).unwrap();
        assert_eq!(c, PipelineConfig::default());
        let c = PipelineConfig::resolve(
            None,
            &vars(&[("MEDEVAL_SEED", "7"), ("MEDEVAL_SPLIT_BUDGET", "500"), ("MEDEVAL_INGEST_WINDOW", "-1000:100")]),
        )
        .unwrap();
        assert_eq!((c.seed, c.split.budget), (7, 500));
        assert_eq!(c.ingest.window, "-1000:100");
        assert_ne!(c.fingerprint(), PipelineConfig::default().fingerprint());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\n[split]\nbudgt = 10\n").unwrap();
        assert!(PipelineConfig::resolve(Some(&path), &[]).is_err());
        std::fs::write(&path, "seed = 3\n[split]\nbudget = 10\n").unwrap();
        assert_eq!(PipelineConfig::resolve(Some(&path), &[]).unwrap().split.budget, 10);
        assert!(PipelineConfig::resolve(None, &vars(&[("MEDEVAL_SPLIT_NOPE", "1")])).is_err());
    }
}
