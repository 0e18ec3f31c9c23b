//! Episode synthesis with the frontier explorer.
//!
//! An OVON-style episode samples a start pose and a target category, then
//! loops: observe, update the exploration map, and either walk straight to a
//! visible target or pick a frontier subgoal epsilon-greedily and walk to it.
//! Frontiers are priced by the ground-truth geodesic distance from the
//! frontier to the nearest target instance (frontiers the agent cannot reach
//! on its own map are unreachable).
//!
//! A GOAT-style sequence chains several such subtasks in one scene without
//! resetting the pose, the exploration map or the memory bank. Before
//! exploring, each subtask consults memory and, on a hit, plans directly to
//! the remembered position.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path as FsPath;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent_sim::{self, check_success, observe, serialize_pose, Action, ActionParams, Observation, Pose};
use crate::compressor::{self, CompressionConfig};
use crate::frontier::{extract_frontiers, select_subgoal, ExplorationMap, Frontier, Knowledge, DEFAULT_EPSILON};
use crate::grid::{GridCell, Traversable};
use crate::memory::{FrameRecord, MemoryBank, MemoryError, ObservedObject};
use crate::metrics::EpisodeOutcome;
use crate::planner::{geodesic_distance, shortest_path, DistanceField, PlanError};
use crate::rng::{derive_seed, hash_str, Rng};
use crate::scene::Scene;

pub const DEFAULT_STEP_CAP: usize = 500;
pub const DEFAULT_MIN_STEPS: usize = 10;
pub const GOAT_MEMORY_LENGTHS: [usize; 4] = [50, 100, 200, 500];

const START_STREAM: u64 = 1;
const TARGET_STREAM: u64 = 2;
const EXPLORE_STREAM: u64 = 3;
const FRAME_STREAM: u64 = 4;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid explorer config: {0}")]
    InvalidConfig(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Compress(#[from] compressor::CompressError),
    #[error("dataset line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatagenError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerConfig {
    pub epsilon: f64,
    pub fov_degrees: f64,
    pub range_m: f64,
    pub step_cap: usize,
    pub actions: ActionParams,
    /// Frame capacity of the memory bank in single-goal episodes.
    pub max_frames: usize,
    pub compression: CompressionConfig,
    pub system_prompt_tokens: usize,
    pub instruction_tokens: usize,
    pub pose_text_tokens: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            fov_degrees: agent_sim::DEFAULT_FOV_DEG,
            range_m: agent_sim::DEFAULT_RANGE_M,
            step_cap: DEFAULT_STEP_CAP,
            actions: ActionParams::default(),
            max_frames: 500,
            compression: CompressionConfig::default(),
            system_prompt_tokens: 0,
            instruction_tokens: 0,
            pose_text_tokens: agent_sim::pose_text_token_estimate(&serialize_pose(&Pose::new(0.0, 0.0, 0.0))),
        }
    }
}

impl ExplorerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatagenError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(self.fov_degrees > 0.0 && self.fov_degrees <= 360.0) {
            return bad(format!("fov_degrees {} outside (0, 360]", self.fov_degrees));
        }
        if !(self.range_m > 0.0) {
            return bad(format!("range_m {} must be positive", self.range_m));
        }
        if self.step_cap == 0 || self.max_frames == 0 {
            return bad("step_cap and max_frames must be positive".into());
        }
        let turn = self.actions.turn_deg;
        if !(turn > 0.0) || (90.0 / turn).fract() != 0.0 {
            return bad(format!("turn_deg {turn} must divide 90 so the agent can face grid axes"));
        }
        self.compression.validate()?;
        Ok(())
    }

    fn check_scene(&self, scene: &Scene) -> Result<()> {
        self.validate()?;
        if (self.actions.forward_m - scene.cell_size()).abs() > 1e-12 {
            return Err(DatagenError::InvalidConfig(format!(
                "forward step {} m must equal the scene cell size {} m",
                self.actions.forward_m,
                scene.cell_size()
            )));
        }
        if scene.objects().is_empty() {
            return Err(DatagenError::InvalidRequest(format!("scene {} has no objects", scene.scene_id())));
        }
        Ok(())
    }

    fn headings(&self) -> usize {
        (360.0 / self.actions.turn_deg).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Ovon,
    Goat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub category: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub row: usize,
    pub col: usize,
    /// Number of actions taken before the subgoal was chosen.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub index: usize,
    pub pose_text: String,
    pub token_count: usize,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub success: bool,
    #[serde(rename = "L")]
    pub path_length: f64,
    #[serde(rename = "L_star")]
    pub shortest_length: f64,
    pub steps: usize,
    pub context_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// One navigation episode, or one subtask of a lifelong sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene_id: String,
    pub seed: u64,
    pub kind: EpisodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<usize>,
    pub instruction: String,
    pub target: Target,
    pub start_pose: Pose,
    pub final_pose: Pose,
    pub actions: Vec<Action>,
    pub subgoals: Vec<Subgoal>,
    pub frames: Vec<FrameSummary>,
    /// The subtask went straight to a remembered position.
    #[serde(default)]
    pub recalled: bool,
    pub epsilon: f64,
    pub outcome: OutcomeRecord,
}

impl Episode {
    pub fn to_outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            success: self.outcome.success,
            path_length: self.outcome.path_length,
            shortest_length: self.outcome.shortest_length,
            category: self.target.category.clone(),
            steps: self.outcome.steps,
            context_tokens_final: self.outcome.context_tokens,
        }
    }

    fn sort_key(&self) -> (&str, u64, usize) {
        (&self.scene_id, self.seed, self.subtask.unwrap_or(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoatEpisode {
    pub scene_id: String,
    pub seed: u64,
    pub memory_length: usize,
    pub subtasks: Vec<Episode>,
}

impl GoatEpisode {
    pub fn outcomes(&self) -> Vec<EpisodeOutcome> {
        self.subtasks.iter().map(Episode::to_outcome).collect()
    }

    pub fn targets(&self) -> Vec<String> {
        self.subtasks.iter().map(|e| e.target.category.clone()).collect()
    }
}

/// Instruction text for a target category.
pub fn instruction_for(category: &str) -> String {
    format!("Find the {category}")
}

/// Seed of the `index`-th episode drawn in a scene.
pub fn episode_seed(scene_id: &str, index: u64) -> u64 {
    derive_seed(hash_str(scene_id), &[index])
}

/// Poses after each action, starting from `start`.
pub fn replay(scene: &Scene, start: &Pose, actions: &[Action], params: &ActionParams) -> Vec<Pose> {
    let mut pose = *start;
    actions
        .iter()
        .map(|&a| {
            pose = agent_sim::step(scene, &pose, a, params);
            pose
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Walk {
    Arrived,
    Interrupted,
    CapReached,
    Blocked,
}

/// Agent state that persists across subtasks.
struct Navigator<'a> {
    scene: &'a Scene,
    cfg: &'a ExplorerConfig,
    pose: Pose,
    map: ExplorationMap,
    bank: MemoryBank,
    next_frame: usize,
    frame_seed_base: u64,
    tokens_per_frame: usize,
    last_obs: Observation,
    /// Object sightings during the current subtask.
    sightings: Vec<Target>,
}

/// Per-subtask recording.
#[derive(Default)]
struct Log {
    actions: Vec<Action>,
    frames: Vec<FrameSummary>,
    subgoals: Vec<Subgoal>,
    path_length: f64,
}

impl<'a> Navigator<'a> {
    fn new(scene: &'a Scene, cfg: &'a ExplorerConfig, pose: Pose, capacity: usize, seed: u64) -> Result<Self> {
        let tokens_per_frame = compressor::token_count(&cfg.compression)?;
        let bank = MemoryBank::new(capacity, tokens_per_frame)?.with_overheads(
            cfg.system_prompt_tokens,
            cfg.instruction_tokens,
            cfg.pose_text_tokens,
        );
        let last_obs = Observation { visible_cells: vec![], visible_objects: vec![], pose, frame_index: 0 };
        Ok(Self {
            scene,
            cfg,
            pose,
            map: ExplorationMap::for_scene(scene),
            bank,
            next_frame: 0,
            frame_seed_base: derive_seed(seed, &[FRAME_STREAM]),
            tokens_per_frame,
            last_obs,
            sightings: Vec::new(),
        })
    }

    fn cell(&self) -> GridCell {
        self.pose.cell(self.scene).expect("agent stays on the grid")
    }

    /// Observe from the current pose and store the frame.
    fn capture(&mut self, log: &mut Log) -> Result<()> {
        let mut obs = observe(self.scene, &self.pose, self.cfg.fov_degrees, self.cfg.range_m);
        obs.frame_index = self.next_frame;
        self.map.update_explored(self.scene, &obs);
        let pose_text = serialize_pose(&self.pose);
        let observed: Vec<ObservedObject> = obs
            .visible_objects
            .iter()
            .map(|o| ObservedObject { category: o.category.clone(), x: o.x, y: o.y })
            .collect();
        let mut categories: Vec<String> = observed.iter().map(|o| o.category.clone()).collect();
        categories.sort();
        categories.dedup();
        log.frames.push(FrameSummary {
            index: self.next_frame,
            pose_text: pose_text.clone(),
            token_count: self.tokens_per_frame,
            categories,
        });
        self.bank.append_frame(FrameRecord {
            frame_index: self.next_frame,
            pose: self.pose,
            pose_text,
            frame_seed: derive_seed(self.frame_seed_base, &[self.next_frame as u64]),
            token_count: self.tokens_per_frame,
            observed,
        })?;
        for o in &obs.visible_objects {
            if !self.sightings.iter().any(|t| t.x == o.x && t.y == o.y) {
                self.sightings.push(Target { category: o.category.clone(), x: o.x, y: o.y });
            }
        }
        self.next_frame += 1;
        self.last_obs = obs;
        Ok(())
    }

    fn act(&mut self, action: Action, log: &mut Log) -> Result<()> {
        let next = agent_sim::step(self.scene, &self.pose, action, &self.cfg.actions);
        let (x0, y0) = self.pose.xy();
        log.path_length += next.distance_to(x0, y0);
        self.pose = next;
        log.actions.push(action);
        if action != Action::Stop {
            self.capture(log)?;
        }
        Ok(())
    }

    fn cap_reached(&self, log: &Log) -> bool {
        log.actions.len() >= self.cfg.step_cap
    }

    /// A sighted instance of the watched category has a known path.
    fn interrupted(&self, watch: Option<&str>) -> Result<bool> {
        match watch {
            Some(c) if self.last_obs.sees_category(c) || self.sightings.iter().any(|t| t.category == c) => {
                Ok(self.sighted_target(c)?.is_some())
            }
            _ => Ok(false),
        }
    }

    /// Turn toward `yaw_deg` using the shorter direction, ties turning left.
    fn face(&mut self, yaw_deg: f64, log: &mut Log, watch: Option<&str>) -> Result<Walk> {
        let n = self.cfg.headings();
        let current = self.pose.yaw().to_degrees();
        let delta = (yaw_deg - current).rem_euclid(360.0);
        let left = ((delta / self.cfg.actions.turn_deg).round() as usize) % n;
        let right = (n - left) % n;
        let (action, count) = if left <= right { (Action::TurnLeft, left) } else { (Action::TurnRight, right) };
        for _ in 0..count {
            if self.cap_reached(log) {
                return Ok(Walk::CapReached);
            }
            self.act(action, log)?;
            if self.interrupted(watch)? {
                return Ok(Walk::Interrupted);
            }
        }
        Ok(Walk::Arrived)
    }

    /// Follow 4-connected waypoints, turning to face each next cell.
    fn walk(&mut self, waypoints: &[GridCell], log: &mut Log, watch: Option<&str>) -> Result<Walk> {
        for pair in waypoints.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            match self.face(heading_deg(from, to), log, watch)? {
                Walk::Arrived => {}
                other => return Ok(other),
            }
            if self.cap_reached(log) {
                return Ok(Walk::CapReached);
            }
            self.act(Action::MoveForward, log)?;
            if self.cell() != to {
                return Ok(Walk::Blocked);
            }
            if self.interrupted(watch)? {
                return Ok(Walk::Interrupted);
            }
        }
        Ok(Walk::Arrived)
    }

    /// Cell of the sighted target instance with the shortest optimistic path.
    fn sighted_target(&self, category: &str) -> Result<Option<GridCell>> {
        let mut best: Option<(usize, GridCell)> = None;
        for o in self.sightings.iter().filter(|o| o.category == category) {
            let cell = self.scene.cell_at(o.x, o.y).expect("objects are in bounds");
            if let Some(p) = shortest_path(&Optimistic(&self.map), self.cell(), cell, self.scene.cell_size())? {
                if best.is_none_or(|(steps, _)| p.steps() < steps) {
                    best = Some((p.steps(), cell));
                }
            }
        }
        Ok(best.map(|(_, c)| c))
    }

    /// Walk to `goal`, replanning on the optimistic map after every move.
    fn navigate_to(&mut self, goal: GridCell, log: &mut Log) -> Result<Walk> {
        let cs = self.scene.cell_size();
        loop {
            let here = self.cell();
            if here == goal {
                return Ok(Walk::Arrived);
            }
            let Some(path) = shortest_path(&Optimistic(&self.map), here, goal, cs)? else {
                return Ok(Walk::Blocked);
            };
            let next = path.waypoints[1];
            match self.face(heading_deg(here, next), log, None)? {
                Walk::Arrived => {}
                other => return Ok(other),
            }
            // Facing the next cell reveals it.
            if self.map.get(next) == Some(Knowledge::ExploredObstacle) {
                continue;
            }
            if self.cap_reached(log) {
                return Ok(Walk::CapReached);
            }
            self.act(Action::MoveForward, log)?;
            if self.cell() != next {
                return Ok(Walk::Blocked);
            }
        }
    }

    fn on_target(&self, category: &str) -> Option<Target> {
        self.scene
            .objects_of(category)
            .find(|o| check_success(&self.pose, o.x, o.y))
            .map(|o| Target { category: category.to_string(), x: o.x, y: o.y })
    }

    fn finish(&mut self, log: &mut Log, category: &str) -> Result<Option<Target>> {
        match self.on_target(category) {
            Some(t) if !self.cap_reached(log) => {
                self.act(Action::Stop, log)?;
                Ok(Some(t))
            }
            _ => Ok(None),
        }
    }

    /// Run one find-the-category subtask from the current state.
    fn run_subtask(&mut self, category: &str, use_recall: bool, rng: &mut Rng) -> Result<SubtaskResult> {
        let scene = self.scene;
        let cs = scene.cell_size();
        let start_pose = self.pose;
        let mut log = Log::default();
        let subtask_first_frame = self.next_frame;
        self.sightings.clear();
        if self.map.explored_count() == 0 {
            self.capture(&mut log)?;
        } else {
            for o in &self.last_obs.visible_objects {
                self.sightings.push(Target { category: o.category.clone(), x: o.x, y: o.y });
            }
        }

        let goal_cells: Vec<GridCell> =
            scene.objects_of(category).filter_map(|o| scene.cell_at(o.x, o.y)).collect();
        let goal_field = DistanceField::from_sources(scene, goal_cells);
        let nearest = nearest_instance(scene, self.pose.xy(), category)?;
        let Some((shortest, nearest_target)) = nearest else {
            return Ok(self.result(log, start_pose, category, None, None, false, Some("unreachable_target")));
        };

        let mut recalled = false;
        if use_recall {
            // Only frames from earlier subtasks count as memory.
            if let Some(hit) = self.bank.recall_target(category).filter(|h| h.frame_index < subtask_first_frame) {
                let goal = scene.cell_at(hit.x, hit.y).expect("recalled positions are in bounds");
                debug!("recall hit for {category} at frame {}", hit.frame_index);
                recalled = true;
                if self.navigate_to(goal, &mut log)? == Walk::Arrived {
                    if let Some(t) = self.finish(&mut log, category)? {
                        return Ok(self.result(log, start_pose, category, Some(t), Some(shortest), true, None));
                    }
                }
            }
        }

        let reason = loop {
            if self.cap_reached(&log) {
                break "step_cap";
            }
            if let Some(goal) = self.sighted_target(category)? {
                match self.navigate_to(goal, &mut log)? {
                    Walk::Arrived => match self.finish(&mut log, category)? {
                        Some(t) => return Ok(self.result(log, start_pose, category, Some(t), Some(shortest), recalled, None)),
                        None if self.cap_reached(&log) => break "step_cap",
                        None => break "missed_target",
                    },
                    Walk::CapReached => break "step_cap",
                    _ => break "blocked",
                }
            }

            let frontiers = extract_frontiers(&self.map);
            if frontiers.is_empty() {
                break "exploration_exhausted";
            }
            let reach = DistanceField::from_sources(&self.map, [self.cell()]);
            let approaches: Vec<Option<GridCell>> = frontiers.iter().map(|f| approach_cell(&reach, f)).collect();
            let costs: Vec<f64> = frontiers
                .iter()
                .zip(&approaches)
                .map(|(f, a)| match (a, goal_field.hops(f.representative)) {
                    (Some(_), Some(h)) => h as f64 * cs,
                    _ => f64::INFINITY,
                })
                .collect();
            let pick = match select_subgoal(&frontiers, &costs, self.cfg.epsilon, rng) {
                Ok(i) => i,
                Err(_) => break "exploration_exhausted",
            };
            let rep = frontiers[pick].representative;
            log.subgoals.push(Subgoal { row: rep.row, col: rep.col, step: log.actions.len() });

            let Some(goal) = approaches[pick] else {
                break "no_reachable_frontier";
            };
            let path = shortest_path(&self.map, self.cell(), goal, cs)?.expect("approach cells are reachable");
            let (actions_before, explored_before) = (log.actions.len(), self.map.explored_count());
            match self.walk(&path.waypoints, &mut log, Some(category))? {
                Walk::Arrived => {
                    // Look at what made this cell a frontier.
                    if let Some(&unknown) = self.map.unknown_neighbors(goal).first() {
                        if self.face(heading_deg(goal, unknown), &mut log, Some(category))? == Walk::CapReached {
                            break "step_cap";
                        }
                    }
                }
                Walk::Interrupted => {}
                Walk::CapReached => break "step_cap",
                Walk::Blocked => break "blocked",
            }
            if log.actions.len() == actions_before && self.map.explored_count() == explored_before {
                break "stalled";
            }
        };
        debug!("subtask for {category} failed: {reason}");
        Ok(self.result(log, start_pose, category, Some(nearest_target), Some(shortest), recalled, Some(reason)))
    }

    #[allow(clippy::too_many_arguments)]
    fn result(
        &self,
        log: Log,
        start_pose: Pose,
        category: &str,
        target: Option<Target>,
        shortest: Option<f64>,
        recalled: bool,
        failure: Option<&str>,
    ) -> SubtaskResult {
        let target = target.unwrap_or_else(|| {
            let o = self.scene.objects_of(category).next().expect("targets are scene categories");
            Target { category: category.to_string(), x: o.x, y: o.y }
        });
        SubtaskResult {
            instruction: instruction_for(category),
            target,
            start_pose,
            final_pose: self.pose,
            outcome: OutcomeRecord {
                success: failure.is_none(),
                path_length: log.path_length,
                shortest_length: shortest.unwrap_or(0.0),
                steps: log.actions.len(),
                context_tokens: self.bank.context_tokens(),
                reason: failure.map(str::to_string),
            },
            actions: log.actions,
            subgoals: log.subgoals,
            frames: log.frames,
            recalled,
        }
    }

    fn reset_knowledge(&mut self) {
        self.map = ExplorationMap::for_scene(self.scene);
        self.bank.clear();
    }
}

struct SubtaskResult {
    instruction: String,
    target: Target,
    start_pose: Pose,
    final_pose: Pose,
    actions: Vec<Action>,
    subgoals: Vec<Subgoal>,
    frames: Vec<FrameSummary>,
    recalled: bool,
    outcome: OutcomeRecord,
}

impl SubtaskResult {
    fn into_episode(self, scene: &Scene, seed: u64, kind: EpisodeKind, epsilon: f64) -> Episode {
        Episode {
            scene_id: scene.scene_id().to_string(),
            seed,
            kind,
            memory_length: None,
            subtask: None,
            instruction: self.instruction,
            target: self.target,
            start_pose: self.start_pose,
            final_pose: self.final_pose,
            actions: self.actions,
            subgoals: self.subgoals,
            frames: self.frames,
            recalled: self.recalled,
            epsilon,
            outcome: self.outcome,
        }
    }
}

/// The exploration map with unknown cells assumed passable.
struct Optimistic<'m>(&'m ExplorationMap);

impl Traversable for Optimistic<'_> {
    fn width(&self) -> usize {
        self.0.width()
    }

    fn height(&self) -> usize {
        self.0.height()
    }

    fn is_passable(&self, cell: GridCell) -> bool {
        self.0.get(cell).is_some_and(|k| k != Knowledge::ExploredObstacle)
    }
}

/// Yaw in degrees that faces a 4-neighbor.
fn heading_deg(from: GridCell, to: GridCell) -> f64 {
    if to.col > from.col {
        0.0
    } else if to.row > from.row {
        90.0
    } else if to.col < from.col {
        180.0
    } else {
        270.0
    }
}

/// Reachable cell of a frontier closest to its representative.
fn approach_cell(reach: &DistanceField, frontier: &Frontier) -> Option<GridCell> {
    let rep = frontier.representative;
    let d2 = |c: GridCell| {
        let (dr, dc) = (c.row as i64 - rep.row as i64, c.col as i64 - rep.col as i64);
        dr * dr + dc * dc
    };
    frontier.cells.iter().copied().filter(|&c| reach.hops(c).is_some()).min_by_key(|&c| (d2(c), c))
}

/// Geodesic distance to, and position of, the nearest instance of `category`.
fn nearest_instance(scene: &Scene, from: (f64, f64), category: &str) -> Result<Option<(f64, Target)>> {
    let mut best: Option<(f64, Target)> = None;
    for o in scene.objects_of(category) {
        if let Some(d) = geodesic_distance(scene, scene.cell_size(), from, (o.x, o.y))? {
            if best.as_ref().is_none_or(|(b, _)| d < *b) {
                best = Some((d, Target { category: category.to_string(), x: o.x, y: o.y }));
            }
        }
    }
    Ok(best)
}

fn sample_heading(cfg: &ExplorerConfig, rng: &mut Rng) -> f64 {
    (rng.index(cfg.headings()) as f64 * cfg.actions.turn_deg).to_radians()
}

/// Generate one single-goal episode.
///
/// The target category is drawn uniformly from the scene's categories and
/// the start cell uniformly from free cells farther than the success radius
/// from every instance of it.
pub fn generate_ovon_episode(scene: &Scene, seed: u64, cfg: &ExplorerConfig) -> Result<Episode> {
    cfg.check_scene(scene)?;
    let mut rng = Rng::seed_from_u64(derive_seed(seed, &[START_STREAM]));
    let categories = scene.categories();
    let category = categories[rng.index(categories.len())].clone();

    let goal_cells: Vec<GridCell> = scene.objects_of(&category).filter_map(|o| scene.cell_at(o.x, o.y)).collect();
    let field = DistanceField::from_sources(scene, goal_cells);
    let radius_hops = agent_sim::SUCCESS_RADIUS_M / scene.cell_size();
    let free: Vec<GridCell> = scene.free_cells().collect();
    let far: Vec<GridCell> =
        free.iter().copied().filter(|&c| field.hops(c).is_some_and(|h| f64::from(h) > radius_hops)).collect();
    let pool = if far.is_empty() { &free } else { &far };
    let start_cell = pool[rng.index(pool.len())];
    let start = Pose::at_cell(start_cell, scene.cell_size(), sample_heading(cfg, &mut rng));

    let mut nav = Navigator::new(scene, cfg, start, cfg.max_frames, seed)?;
    let mut explore_rng = Rng::seed_from_u64(derive_seed(seed, &[EXPLORE_STREAM, 0]));
    let result = nav.run_subtask(&category, false, &mut explore_rng)?;
    Ok(result.into_episode(scene, seed, EpisodeKind::Ovon, cfg.epsilon))
}

/// How later subtask targets are picked when none are given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Uniform over scene categories.
    #[default]
    Random,
    /// Prefer categories still held in memory.
    Revisit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoatConfig {
    pub explorer: ExplorerConfig,
    /// Carry the exploration map and memory bank across subtasks and consult
    /// memory before exploring. When false both are wiped at each subtask
    /// start; only the pose persists.
    pub use_memory: bool,
    pub target_policy: TargetPolicy,
    /// Explicit per-subtask target categories.
    pub targets: Option<Vec<String>>,
    pub allowed_memory_lengths: Vec<usize>,
}

impl Default for GoatConfig {
    fn default() -> Self {
        Self {
            explorer: ExplorerConfig::default(),
            use_memory: true,
            target_policy: TargetPolicy::Random,
            targets: None,
            allowed_memory_lengths: GOAT_MEMORY_LENGTHS.to_vec(),
        }
    }
}

/// Generate a lifelong sequence of `num_subtasks` find-the-category tasks.
///
/// Target categories are restricted to those whose nearest instance lies
/// beyond the success radius of the agent's current position; if none
/// qualifies the farthest category is used.
pub fn generate_goat_sequence(
    scene: &Scene,
    seed: u64,
    num_subtasks: usize,
    memory_length: usize,
    cfg: &GoatConfig,
) -> Result<GoatEpisode> {
    let ecfg = &cfg.explorer;
    ecfg.check_scene(scene)?;
    if num_subtasks < 2 {
        return Err(DatagenError::InvalidRequest(format!("a lifelong sequence needs at least 2 subtasks, got {num_subtasks}")));
    }
    if !cfg.allowed_memory_lengths.contains(&memory_length) {
        return Err(DatagenError::InvalidRequest(format!(
            "memory_length {memory_length} not in {:?}",
            cfg.allowed_memory_lengths
        )));
    }
    if let Some(t) = &cfg.targets {
        if t.len() < num_subtasks {
            return Err(DatagenError::InvalidRequest(format!("{} targets for {num_subtasks} subtasks", t.len())));
        }
        if let Some(missing) = t.iter().find(|c| scene.objects_of(c).next().is_none()) {
            return Err(DatagenError::InvalidRequest(format!("target {missing} is not in {}", scene.scene_id())));
        }
    }

    let mut rng = Rng::seed_from_u64(derive_seed(seed, &[START_STREAM]));
    let free: Vec<GridCell> = scene.free_cells().collect();
    let start_cell = free[rng.index(free.len())];
    let start = Pose::at_cell(start_cell, scene.cell_size(), sample_heading(ecfg, &mut rng));
    let mut nav = Navigator::new(scene, ecfg, start, memory_length, seed)?;

    let mut subtasks = Vec::with_capacity(num_subtasks);
    for k in 0..num_subtasks {
        if k > 0 && !cfg.use_memory {
            nav.reset_knowledge();
        }
        let category = match &cfg.targets {
            Some(t) => t[k].clone(),
            None => {
                let mut target_rng = Rng::seed_from_u64(derive_seed(seed, &[TARGET_STREAM, k as u64]));
                choose_target(scene, &nav, k, cfg.target_policy, &mut target_rng)?
            }
        };
        let mut explore_rng = Rng::seed_from_u64(derive_seed(seed, &[EXPLORE_STREAM, k as u64]));
        let result = nav.run_subtask(&category, cfg.use_memory, &mut explore_rng)?;
        let mut ep = result.into_episode(scene, seed, EpisodeKind::Goat, ecfg.epsilon);
        ep.memory_length = Some(memory_length);
        ep.subtask = Some(k);
        subtasks.push(ep);
    }
    Ok(GoatEpisode { scene_id: scene.scene_id().to_string(), seed, memory_length, subtasks })
}

fn choose_target(scene: &Scene, nav: &Navigator<'_>, k: usize, policy: TargetPolicy, rng: &mut Rng) -> Result<String> {
    let here = nav.pose.xy();
    let mut distances = Vec::new();
    for c in scene.categories() {
        if let Some((d, _)) = nearest_instance(scene, here, &c)? {
            distances.push((c, d));
        }
    }
    let eligible = |c: &str| distances.iter().any(|(n, d)| n == c && *d > agent_sim::SUCCESS_RADIUS_M);

    if policy == TargetPolicy::Revisit && k > 0 {
        let remembered: Vec<String> = nav.bank.remembered_categories().into_iter().filter(|c| eligible(c)).collect();
        if !remembered.is_empty() {
            return Ok(remembered[rng.index(remembered.len())].clone());
        }
    }
    let pool: Vec<&String> = distances.iter().filter(|(_, d)| *d > agent_sim::SUCCESS_RADIUS_M).map(|(c, _)| c).collect();
    if !pool.is_empty() {
        return Ok(pool[rng.index(pool.len())].clone());
    }
    distances
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c.clone())
        .ok_or_else(|| DatagenError::InvalidRequest(format!("no reachable target away from the agent in {}", scene.scene_id())))
}

/// Keep episodes with at least `min_steps` actions, preserving order.
pub fn filter_episodes(episodes: Vec<Episode>, min_steps: usize) -> Vec<Episode> {
    episodes.into_iter().filter(|e| e.actions.len() >= min_steps).collect()
}

/// JSONL text, one episode per line, sorted by `(scene_id, seed, subtask)`.
pub fn dataset_to_string(episodes: &[Episode]) -> String {
    let mut sorted: Vec<&Episode> = episodes.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::new();
    for e in sorted {
        out.push_str(&serde_json::to_string(e).expect("episodes serialize"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(episodes: &[Episode], path: impl AsRef<FsPath>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(dataset_to_string(episodes).as_bytes())?;
    Ok(())
}

/// Parse JSONL; errors carry the 1-based line number.
pub fn parse_dataset(reader: impl BufRead) -> Result<Vec<Episode>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ep = serde_json::from_str(&line).map_err(|e| DatagenError::Line { line: i + 1, reason: e.to_string() })?;
        out.push(ep);
    }
    Ok(out)
}

pub fn read_dataset(path: impl AsRef<FsPath>) -> Result<Vec<Episode>> {
    parse_dataset(BufReader::new(fs::File::open(path)?))
}

/// Regroup the GOAT subtasks of a dataset into sequences.
pub fn group_goat(episodes: &[Episode]) -> Vec<GoatEpisode> {
    let mut out: Vec<GoatEpisode> = Vec::new();
    for e in episodes.iter().filter(|e| e.kind == EpisodeKind::Goat) {
        match out.last_mut() {
            Some(g) if g.scene_id == e.scene_id && g.seed == e.seed => g.subtasks.push(e.clone()),
            _ => out.push(GoatEpisode {
                scene_id: e.scene_id.clone(),
                seed: e.seed,
                memory_length: e.memory_length.unwrap_or(0),
                subtasks: vec![e.clone()],
            }),
        }
    }
    out
}
