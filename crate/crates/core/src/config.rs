//! Versioned run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::network::{DiscriminatorConfig, GeneratorConfig};
use crate::pgt::BlendSchedule;

pub const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Includes the Sow window size as `generator.window`.
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    #[serde(default)]
    pub schedule: BlendSchedule,
    #[serde(default)]
    pub loss_weights: LossWeights,
    pub seed: u64,
    /// Named input files, relative to the config file.
    #[serde(default)]
    pub paths: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: RUN_CONFIG_SCHEMA_VERSION,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            schedule: BlendSchedule::default(),
            loss_weights: LossWeights::default(),
            seed: 0,
            paths: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RUN_CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} is not supported (expected {RUN_CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.generator.validate()?;
        self.schedule.validate()?;
        self.loss_weights.validate()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses and validates the file, and checks every entry of `paths`
    /// exists. The returned paths are resolved against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (name, p) in cfg.paths.iter_mut() {
            let resolved = base.join(&*p);
            if !resolved.exists() {
                return Err(Error::io(
                    &resolved,
                    std::io::Error::new(std::io::ErrorKind::NotFound, format!("config path `{name}` does not exist")),
                ));
            }
            *p = resolved;
        }
        Ok(cfg)
    }

    /// The generator with the run seed applied.
    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig { seed: self.seed, ..self.generator.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig { seed: 7, ..RunConfig::default() };
        cfg.paths.insert("source".into(), "face0/image.png".into());
        let again = RunConfig::from_json_str(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_json(), cfg.to_json());
    }

    #[test]
    fn missing_path_and_bad_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.paths.insert("source".into(), "nope.png".into());
        let p = dir.path().join("run.json");
        std::fs::write(&p, cfg.to_json()).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Io { .. })));

        std::fs::write(dir.path().join("nope.png"), b"x").unwrap();
        assert!(RunConfig::load(&p).is_ok());

        cfg.schema_version = 2;
        assert!(matches!(RunConfig::from_json_str(&cfg.to_json()), Err(Error::Config(_))));
    }
}
