use std::path::Path;

use anyhow::{bail, Context, Result};
use bsmd_core::econ::{CapacityParams, GameParams};
use bsmd_core::workload::ScenarioConfig;
use serde::{Deserialize, Serialize};

/// Everything a config file may set. Each section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub capacity: CapacityParams,
    pub game: Option<GameParams>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        if !path.is_file() {
            bail!("config file not found: {}", path.display());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.scenario.validate().with_context(|| format!("{}: [scenario]", path.display()))?;
        cfg.capacity.validate().with_context(|| format!("{}: [capacity]", path.display()))?;
        if let Some(g) = &cfg.game {
            g.validate().with_context(|| format!("{}: [game]", path.display()))?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_unknown_keys_fail() {
        let cfg: RunConfig = toml::from_str("[scenario]\npopulation = 3\n[scenario.link]\nbase_ms = 4\n").unwrap();
        assert_eq!(cfg.scenario.population, 3);
        assert_eq!(cfg.scenario.link.base_ms, 4);
        assert_eq!(cfg.capacity, CapacityParams::default());
        let err = toml::from_str::<RunConfig>("[scenario]\npopulaton = 3\n").unwrap_err().to_string();
        assert!(err.contains("populaton"), "{err}");
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = RunConfig::load(Some(Path::new("/nonexistent/run.toml"))).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/run.toml"));
    }
}
