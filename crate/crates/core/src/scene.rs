//! The immutable simulated world: an occupancy grid plus categorized objects.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::grid::{GridCell, Traversable};
use crate::rng::Rng;

pub const DEFAULT_CELL_SIZE: f64 = 0.25;
pub const MIN_GRID_SIDE: usize = 8;
pub const MAX_OBSTACLE_DENSITY: f64 = 0.4;
/// Obstacle layouts drawn per scene before generation gives up.
pub const CONNECTIVITY_RETRIES: usize = 1000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("no connected layout found after {0} attempts")]
    Disconnected(usize),
    #[error("parse error in field `{field}`: {reason}")]
    Parse { field: String, reason: String },
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SceneError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub object_id: String,
    pub category: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub obstacle_density: f64,
    pub object_count: usize,
    pub category_pool: Vec<String>,
    pub cell_size: f64,
}

/// Category names used when no pool is configured.
pub const DEFAULT_CATEGORIES: [&str; 8] = [
    "island",
    "microwave",
    "carpet",
    "freezer",
    "piano",
    "book",
    "hanging clothes",
    "shower glass",
];

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            obstacle_density: 0.15,
            object_count: 8,
            category_pool: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            cell_size: DEFAULT_CELL_SIZE,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SceneError::InvalidParams(msg));
        if self.width < MIN_GRID_SIDE || self.height < MIN_GRID_SIDE {
            return bad(format!(
                "grid must be at least {MIN_GRID_SIDE}x{MIN_GRID_SIDE}, got {}x{}",
                self.width, self.height
            ));
        }
        if !(0.0..=MAX_OBSTACLE_DENSITY).contains(&self.obstacle_density) {
            return bad(format!("obstacle_density {} outside [0, {MAX_OBSTACLE_DENSITY}]", self.obstacle_density));
        }
        if self.object_count == 0 {
            return bad("object_count must be at least 1".into());
        }
        if self.category_pool.is_empty() || self.category_pool.iter().any(|c| c.is_empty()) {
            return bad("category_pool must be non-empty and contain no empty names".into());
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad(format!("cell_size {} must be positive", self.cell_size));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scene_id: String,
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<Cell>,
    objects: Vec<ObjectInstance>,
}

impl Traversable for Scene {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn is_passable(&self, cell: GridCell) -> bool {
        self.cell(cell) == Some(Cell::Free)
    }
}

impl Scene {
    /// Build a scene from raw parts, checking every invariant.
    pub fn new(
        scene_id: impl Into<String>,
        width: usize,
        height: usize,
        cell_size: f64,
        cells: Vec<Cell>,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self> {
        let scene = Self { scene_id: scene_id.into(), width, height, cell_size, cells, objects };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(SceneError::Validation(msg));
        if self.width < MIN_GRID_SIDE || self.height < MIN_GRID_SIDE {
            return invalid(format!("grid {}x{} smaller than {MIN_GRID_SIDE}x{MIN_GRID_SIDE}", self.width, self.height));
        }
        if self.cells.len() != self.width * self.height {
            return invalid(format!("expected {} cells, found {}", self.width * self.height, self.cells.len()));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return invalid(format!("cell_size {} must be positive", self.cell_size));
        }
        if !self.cells.contains(&Cell::Free) {
            return invalid("scene has no free cell".into());
        }
        for obj in &self.objects {
            if obj.category.is_empty() {
                return invalid(format!("object {} has an empty category", obj.object_id));
            }
            match self.cell_at(obj.x, obj.y) {
                None => return invalid(format!("object {} at ({}, {}) is out of bounds", obj.object_id, obj.x, obj.y)),
                Some(c) if !self.is_passable(c) => {
                    return invalid(format!("object {} lies on obstacle cell ({}, {})", obj.object_id, c.row, c.col))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, cell: GridCell) -> Option<Cell> {
        self.contains(cell).then(|| self.cells[self.index_of(cell)])
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Option<GridCell> {
        GridCell::from_position(x, y, self.cell_size, self.width, self.height)
    }

    pub fn is_free_position(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some_and(|c| self.is_passable(c))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| GridCell::new(r, c)))
            .filter(|&c| self.is_passable(c))
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Obstacle).count()
    }

    /// Sorted, de-duplicated object categories present in the scene.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self.objects.iter().map(|o| o.category.clone()).collect();
        cats.sort();
        cats.dedup();
        cats
    }

    pub fn objects_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.iter().filter(move |o| o.category == category)
    }

    /// Whether all free cells form one 4-connected component.
    pub fn is_connected(&self) -> bool {
        free_region_connected(&self.cells, self.width, self.height)
    }

    pub fn to_json(&self) -> String {
        let cells: String = self.cells.iter().map(|c| if *c == Cell::Free { 'F' } else { 'O' }).collect();
        let doc = json!({
            "scene_id": self.scene_id,
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "cells": cells,
            "objects": self.objects,
        });
        serde_json::to_string_pretty(&doc).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)
            .map_err(|e| SceneError::Parse { field: "<document>".into(), reason: e.to_string() })?;
        let obj = root
            .as_object()
            .ok_or_else(|| SceneError::Parse { field: "<document>".into(), reason: "expected a JSON object".into() })?;

        let scene_id = str_field(obj, "scene_id")?.to_string();
        let width = usize_field(obj, "width")?;
        let height = usize_field(obj, "height")?;
        let cell_size = f64_field(obj, "cell_size")?;
        let cell_text = str_field(obj, "cells")?;
        let cells = cell_text
            .chars()
            .enumerate()
            .map(|(i, ch)| match ch {
                'F' => Ok(Cell::Free),
                'O' => Ok(Cell::Obstacle),
                other => Err(SceneError::Parse {
                    field: "cells".into(),
                    reason: format!("unexpected character {other:?} at index {i}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if cells.len() != width * height {
            return Err(SceneError::Parse {
                field: "cells".into(),
                reason: format!("length {} does not match width*height = {}", cells.len(), width * height),
            });
        }
        let raw_objects = obj
            .get("objects")
            .and_then(Value::as_array)
            .ok_or_else(|| SceneError::Parse { field: "objects".into(), reason: "missing or not an array".into() })?;
        let objects = raw_objects
            .iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value::<ObjectInstance>(v.clone())
                    .map_err(|e| SceneError::Parse { field: format!("objects[{i}]"), reason: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;

        Scene::new(scene_id, width, height, cell_size, cells, objects)
    }
}

fn missing(field: &str, what: &str) -> SceneError {
    SceneError::Parse { field: field.into(), reason: format!("missing or not {what}") }
}

fn str_field<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str> {
    obj.get(field).and_then(Value::as_str).ok_or_else(|| missing(field, "a string"))
}

fn usize_field(obj: &Map<String, Value>, field: &str) -> Result<usize> {
    obj.get(field)
        .and_then(Value::as_u64)
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| missing(field, "a non-negative integer"))
}

fn f64_field(obj: &Map<String, Value>, field: &str) -> Result<f64> {
    obj.get(field).and_then(Value::as_f64).ok_or_else(|| missing(field, "a number"))
}

fn free_region_connected(cells: &[Cell], width: usize, height: usize) -> bool {
    let Some(start) = cells.iter().position(|&c| c == Cell::Free) else {
        return false;
    };
    let total_free = cells.iter().filter(|&&c| c == Cell::Free).count();
    let mut seen = vec![false; cells.len()];
    let mut queue = VecDeque::from([GridCell::new(start / width, start % width)]);
    seen[start] = true;
    let mut reached = 1;
    while let Some(cell) = queue.pop_front() {
        for n in cell.neighbors4(width, height) {
            let i = n.row * width + n.col;
            if !seen[i] && cells[i] == Cell::Free {
                seen[i] = true;
                reached += 1;
                queue.push_back(n);
            }
        }
    }
    reached == total_free
}

/// Procedurally generate a scene.
///
/// Each cell independently becomes an obstacle with probability
/// `obstacle_density`. A layout whose free cells are not one 4-connected
/// component is discarded and a fresh layout is drawn from the same stream,
/// up to [`CONNECTIVITY_RETRIES`] times. Objects are then placed on distinct
/// free cells (at cell centers) chosen by a partial Fisher-Yates shuffle of
/// the row-major free-cell list, each with a category drawn uniformly from
/// the pool.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let (width, height) = (params.width, params.height);
    let mut rng = Rng::seed_from_u64(seed);

    let mut cells = None;
    for _ in 0..CONNECTIVITY_RETRIES {
        let layout: Vec<Cell> = (0..width * height)
            .map(|_| if rng.next_f64() < params.obstacle_density { Cell::Obstacle } else { Cell::Free })
            .collect();
        if free_region_connected(&layout, width, height) {
            cells = Some(layout);
            break;
        }
    }
    let cells = cells.ok_or(SceneError::Disconnected(CONNECTIVITY_RETRIES))?;

    let mut free: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Free).collect();
    if params.object_count > free.len() {
        return Err(SceneError::InvalidParams(format!(
            "object_count {} exceeds the {} free cells",
            params.object_count,
            free.len()
        )));
    }
    let mut objects = Vec::with_capacity(params.object_count);
    for i in 0..params.object_count {
        let j = i + rng.index(free.len() - i);
        free.swap(i, j);
        let idx = free[i];
        let (x, y) = GridCell::new(idx / width, idx % width).center(params.cell_size);
        let category = params.category_pool[rng.index(params.category_pool.len())].clone();
        objects.push(ObjectInstance { object_id: format!("obj_{i:03}"), category, x, y });
    }

    Scene::new(format!("scene_{seed}"), width, height, params.cell_size, cells, objects)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scene.to_json())?;
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    Scene::from_json(&fs::read_to_string(path)?)
}
