//! Experiment configuration: one JSON document, every field optional.

use std::fs;
use std::path::{Path, PathBuf};

use lifenav_core::compressor::{default_channel_plan, CompressionConfig};
use lifenav_core::datagen::{ExplorerConfig, GoatConfig, TargetPolicy, DEFAULT_MIN_STEPS, GOAT_MEMORY_LENGTHS};
use lifenav_core::rng::{derive_seed, hash_str};
use lifenav_core::scene::SceneParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result, WithPath};

/// Token budget that holds 50 uncompressed 598-token frames.
pub const DEFAULT_BUDGET_TOKENS: u64 = 29_900;

const GOAT_SEED_TAG: u64 = 0x474f4154;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, count: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub budget_tokens: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self { budget_tokens: DEFAULT_BUDGET_TOKENS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub min_steps: usize,
    pub goat_sequences_per_scene: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { min_steps: DEFAULT_MIN_STEPS, goat_sequences_per_scene: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoatSettings {
    pub subtasks: usize,
    pub memory_length: usize,
    pub target_policy: TargetPolicy,
    pub allowed_memory_lengths: Vec<usize>,
}

impl Default for GoatSettings {
    fn default() -> Self {
        Self {
            subtasks: 3,
            memory_length: 100,
            target_policy: TargetPolicy::Revisit,
            allowed_memory_lengths: GOAT_MEMORY_LENGTHS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub compression_blocks: Vec<usize>,
    pub memory_lengths: Vec<usize>,
    pub sequences_per_scene: u64,
    pub plots: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            compression_blocks: vec![0, 1, 2, 3],
            memory_lengths: GOAT_MEMORY_LENGTHS.to_vec(),
            sequences_per_scene: 1,
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scene `i` is generated from seed `seed + i`.
    pub seed: u64,
    pub scene: SceneParams,
    pub scene_count: u64,
    /// Episode seeds drawn per scene.
    pub seeds: SeedRange,
    pub explorer: ExplorerConfig,
    pub memory: MemoryConfig,
    pub run: RunConfig,
    pub goat: GoatSettings,
    pub sweep: SweepConfig,
    pub jobs: usize,
    pub out_dir: PathBuf,
    /// Fill the wall-clock column; makes reports run-dependent.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: SceneParams::default(),
            scene_count: 10,
            seeds: SeedRange::default(),
            explorer: ExplorerConfig::default(),
            memory: MemoryConfig::default(),
            run: RunConfig::default(),
            goat: GoatSettings::default(),
            sweep: SweepConfig::default(),
            jobs: 1,
            out_dir: PathBuf::from("lifenav_out"),
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        self.scene.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.explorer.validate()?;
        if (self.explorer.actions.forward_m - self.scene.cell_size).abs() > 1e-12 {
            return bad(format!(
                "explorer.actions.forward_m {} must equal scene.cell_size {}",
                self.explorer.actions.forward_m, self.scene.cell_size
            ));
        }
        if self.scene_count == 0 || self.seeds.count == 0 {
            return bad("scene_count and seeds.count must be positive".into());
        }
        if self.sweep.compression_blocks.is_empty() || self.sweep.memory_lengths.is_empty() {
            return bad("sweep axes must be non-empty".into());
        }
        for &l in self.sweep.memory_lengths.iter().chain([&self.goat.memory_length]) {
            if !self.goat.allowed_memory_lengths.contains(&l) {
                return bad(format!("memory length {l} not in {:?}", self.goat.allowed_memory_lengths));
            }
        }
        for &n in &self.sweep.compression_blocks {
            self.compression_for(n).validate()?;
        }
        if self.goat.subtasks < 2 {
            return bad(format!("goat.subtasks must be at least 2, got {}", self.goat.subtasks));
        }
        if self.jobs == 0 {
            return bad("jobs must be positive".into());
        }
        if self.memory.budget_tokens == 0 {
            return bad("memory.budget_tokens must be positive".into());
        }
        Ok(())
    }

    pub fn scenes_dir(&self) -> PathBuf {
        self.out_dir.join("scenes")
    }

    pub fn scene_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.scene_count).map(|i| self.seed + i)
    }

    pub fn episode_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        self.seeds.start..self.seeds.start + self.seeds.count
    }

    /// Base compression settings with `n` blocks and the default plan.
    pub fn compression_for(&self, n: usize) -> CompressionConfig {
        CompressionConfig { num_blocks: n, channel_plan: default_channel_plan(n), ..self.explorer.compression.clone() }
    }

    pub fn goat_config(&self, compression: CompressionConfig) -> GoatConfig {
        GoatConfig {
            explorer: ExplorerConfig { compression, ..self.explorer.clone() },
            use_memory: true,
            target_policy: self.goat.target_policy,
            targets: None,
            allowed_memory_lengths: self.goat.allowed_memory_lengths.clone(),
        }
    }

    pub fn fixed_overhead(&self) -> u64 {
        (self.explorer.system_prompt_tokens + self.explorer.instruction_tokens) as u64
    }
}

/// Seed of the `index`-th lifelong sequence in a scene.
pub fn sequence_seed(scene_id: &str, index: u64) -> u64 {
    derive_seed(hash_str(scene_id), &[GOAT_SEED_TAG, index])
}
