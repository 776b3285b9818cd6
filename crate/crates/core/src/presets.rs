//! Shipped bin schemes and curriculum schedules, plus the run config file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::curation::{Bin, BinConfig, ChainBuildConfig};
use crate::curriculum::{CurriculumSchedule, Stage};
use crate::pipeline::PipelineConfig;

const PRESETS_TOML: &str = include_str!("../assets/presets.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinsFile {
    bins: Vec<Bin>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    splits: Vec<String>,
    stages: Vec<Stage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetsFile {
    horizon: u64,
    #[serde(default)]
    bins: BTreeMap<String, BinsFile>,
    #[serde(default)]
    schedules: BTreeMap<String, ScheduleFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presets {
    pub horizon: u64,
    pub bins: BTreeMap<String, BinConfig>,
    pub schedules: BTreeMap<String, CurriculumSchedule>,
}

#[derive(Debug, thiserror::Error)]
pub enum PresetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Parse(String),
    #[error("invalid preset {name}: {msg}")]
    Invalid { name: String, msg: String },
    #[error("no {kind} named {name}")]
    Unknown { kind: &'static str, name: String },
}

fn collect_bins(src: BTreeMap<String, BinsFile>) -> Result<BTreeMap<String, BinConfig>, PresetError> {
    src.into_iter()
        .map(|(name, f)| {
            let cfg = BinConfig { name: name.clone(), bins: f.bins };
            cfg.validate().map_err(|msg| PresetError::Invalid { name: name.clone(), msg })?;
            Ok((name, cfg))
        })
        .collect()
}

fn collect_schedules(
    src: BTreeMap<String, ScheduleFile>,
    horizon: u64,
) -> Result<BTreeMap<String, CurriculumSchedule>, PresetError> {
    src.into_iter()
        .map(|(name, f)| {
            let s = CurriculumSchedule {
                name: name.clone(),
                splits: f.splits,
                stages: f.stages,
            };
            let v = crate::curriculum::validate_schedule(&s, horizon);
            if let Some(first) = v.first() {
                return Err(PresetError::Invalid {
                    name,
                    msg: first.to_string(),
                });
            }
            Ok((name, s))
        })
        .collect()
}

impl Presets {
    pub fn parse(text: &str) -> Result<Self, PresetError> {
        let f: PresetsFile = toml::from_str(text).map_err(|e| PresetError::Parse(e.to_string()))?;
        let mut schedules = collect_schedules(f.schedules, f.horizon)?;
        schedules
            .entry("uniform".into())
            .or_insert_with(|| CurriculumSchedule::uniform("uniform", &["easy", "medium", "hard"], f.horizon));
        Ok(Presets {
            horizon: f.horizon,
            bins: collect_bins(f.bins)?,
            schedules,
        })
    }

    pub fn builtin() -> &'static Presets {
        static P: OnceLock<Presets> = OnceLock::new();
        P.get_or_init(|| Presets::parse(PRESETS_TOML).expect("shipped presets are valid"))
    }

    pub fn bin_config(&self, name: &str) -> Result<&BinConfig, PresetError> {
        self.bins.get(name).ok_or_else(|| PresetError::Unknown {
            kind: "bin scheme",
            name: name.into(),
        })
    }

    pub fn schedule(&self, name: &str) -> Result<&CurriculumSchedule, PresetError> {
        self.schedules.get(name).ok_or_else(|| PresetError::Unknown {
            kind: "schedule",
            name: name.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub attempts_m: u32,
    pub max_regeneration_tries: u32,
    pub bin_scheme: String,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            attempts_m: 32,
            max_regeneration_tries: 4,
            bin_scheme: "appendix-b".into(),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    #[serde(default)]
    pipeline: PipelineConfig,
    #[serde(default)]
    chains: ChainSection,
    #[serde(default)]
    bins: BTreeMap<String, BinsFile>,
    #[serde(default)]
    schedules: BTreeMap<String, ScheduleFile>,
}

/// Settings file: `[pipeline]`, `[chains]`, and extra or overriding
/// `[bins.NAME]` / `[schedules.NAME]` tables on top of the presets.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub chains: ChainSection,
    pub presets: Presets,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: PipelineConfig::default(),
            chains: ChainSection::default(),
            presets: Presets::builtin().clone(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PresetError> {
        let f: RunConfigFile = toml::from_str(text).map_err(|e| PresetError::Parse(e.to_string()))?;
        let mut presets = Presets::builtin().clone();
        presets.bins.extend(collect_bins(f.bins)?);
        presets.schedules.extend(collect_schedules(f.schedules, presets.horizon)?);
        Ok(RunConfig {
            pipeline: f.pipeline,
            chains: f.chains,
            presets,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PresetError> {
        let text = std::fs::read_to_string(path).map_err(|e| PresetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn chain_config(&self) -> Result<ChainBuildConfig, PresetError> {
        Ok(ChainBuildConfig {
            attempts_m: self.chains.attempts_m,
            max_regeneration_tries: self.chains.max_regeneration_tries,
            bin_config: self.presets.bin_config(&self.chains.bin_scheme)?.clone(),
        })
    }
}
