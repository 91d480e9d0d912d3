// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline configuration files and named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsgan::cpd::{FakeDraws, JumpRule};
use tsgan::gan::{ModelConfig, TrainConfig};
use tsgan::presets;
use tsgan::timeseries::{ChangePointSpec, VarSpec};
use tsgan::{Error, Result};

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const SEED_ENV: &str = "TSGAN_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Simulation {
    Var(VarSpec),
    ChangePoint(ChangePointSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdSection {
    pub t: Option<usize>,
    pub block_size: Option<usize>,
    pub window_radius: Option<usize>,
    pub threshold: Option<f64>,
    pub jump_rule: Option<JumpRule>,
    pub fake_draws: Option<FakeDraws>,
    pub parallel: Option<bool>,
    pub allow_training_overlap: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub samples: Option<usize>,
    pub projections: Option<usize>,
    pub metrics: Option<Vec<Metric>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    W1Exact,
    W1Sliced,
    NnDistance,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub horizon: Option<usize>,
    pub surrogate_s: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub format_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub simulation: Option<Simulation>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub cpd: CpdSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: None,
            paths: Paths::default(),
            simulation: None,
            model: None,
            train: None,
            cpd: CpdSection::default(),
            eval: EvalSection::default(),
            diagnose: DiagnoseSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Version {
                found: cfg.format_version,
                expected: CONFIG_FORMAT_VERSION,
            });
        }
        Ok(cfg)
    }
}

/// `--seed`, then `TSGAN_SEED`, then the config file, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(text) = std::env::var(SEED_ENV) {
        return text
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("{SEED_ENV}='{text}' is not an unsigned integer")));
    }
    Ok(config.unwrap_or(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Ar20,
    Cp23,
    CpSmall,
    Ar1,
    RandomWalk,
}

impl Preset {
    pub fn simulation(self) -> Simulation {
        match self {
            Preset::Ar20 => Simulation::Var(presets::ar20()),
            Preset::Cp23 => Simulation::ChangePoint(presets::cp23()),
            Preset::CpSmall => Simulation::ChangePoint(presets::cp_small()),
            Preset::Ar1 => Simulation::Var(presets::ar1_half()),
            Preset::RandomWalk => Simulation::Var(presets::random_walk()),
        }
    }

    pub fn model(self) -> ModelConfig {
        match self {
            Preset::Ar20 => presets::ar20_model(),
            Preset::Cp23 => presets::cp23_model(),
            Preset::CpSmall => presets::cp_small_model(),
            Preset::Ar1 | Preset::RandomWalk => ModelConfig::default(),
        }
    }

    pub fn train(self) -> TrainConfig {
        match self {
            Preset::Ar20 => presets::ar20_train(),
            Preset::Cp23 => presets::cp23_train(),
            Preset::CpSmall => presets::cp_small_train(),
            Preset::Ar1 | Preset::RandomWalk => TrainConfig::default(),
        }
    }

    /// Detection geometry `(t, K, w)` for the change-point presets.
    pub fn cpd(self) -> Option<(usize, usize, usize)> {
        let c = match self {
            Preset::Cp23 => presets::cp23_cpd(0),
            Preset::CpSmall => presets::cp_small_cpd(0),
            _ => return None,
        };
        Some((c.t, c.block_size, c.window_radius))
    }
}

/// `dir/name.ext` becomes `dir/name<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/x.csv"), ".meta.json"), PathBuf::from("out/x.meta.json"));
        assert_eq!(sibling(Path::new("m"), ".trace.csv"), PathBuf::from("m.trace.csv"));
    }

    #[test]
    fn config_round_trip_and_version() {
        let mut cfg = PipelineConfig {
            seed: Some(4),
            simulation: Some(Preset::Cp23.simulation()),
            ..PipelineConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        cfg.format_version = 9;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert!(matches!(PipelineConfig::load(Some(&p)), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"format_version":1,"sed":3}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"format_version":1,"train":{"total_gen_steps":3}}"#).unwrap();
        let t = cfg.train.unwrap();
        assert_eq!(t.total_gen_steps, 3);
        assert_eq!(t.batch_size, TrainConfig::default().batch_size);
    }
}
