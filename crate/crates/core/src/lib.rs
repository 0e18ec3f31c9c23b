//! Deterministic lifelong object-goal navigation workbench.
//!
//! The crate simulates an agent in a gridded indoor scene, explores it with
//! an epsilon-greedy frontier policy, stores its history in an image-centric
//! memory whose per-frame cost comes from a visual token compressor, and
//! scores the resulting trajectories with SR and SPL.
//!
//! Everything is a pure function of seeds and configuration: regenerating a
//! scene, an episode or a compressed frame from the same inputs yields
//! bit-identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent_sim;
pub mod compressor;
pub mod datagen;
pub mod frontier;
pub mod grid;
pub mod memory;
pub mod metrics;
pub mod planner;
pub mod rng;
pub mod scene;

pub use agent_sim::{Action, ActionParams, Observation, Pose, SUCCESS_RADIUS_M};
pub use compressor::{CompressionConfig, Compressor, FeatureGrid, TokenSequence};
pub use datagen::{Episode, EpisodeKind, ExplorerConfig, GoatConfig, GoatEpisode, TargetPolicy};
pub use frontier::{ExplorationMap, Frontier, Knowledge};
pub use grid::{GridCell, Traversable};
pub use memory::{FrameRecord, MemoryBank};
pub use metrics::EpisodeOutcome;
pub use planner::Path;
pub use rng::{Rng, SplitMix64};
pub use scene::{Cell, ObjectInstance, Scene, SceneParams};
