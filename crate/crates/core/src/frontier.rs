//! Explored/unknown bookkeeping, frontier extraction and subgoal selection.

use std::collections::VecDeque;

use thiserror::Error;

use crate::agent_sim::Observation;
use crate::grid::{GridCell, Traversable};
use crate::rng::Rng;
use crate::scene::{Cell, Scene};

/// Default probability of deviating from the cheapest frontier.
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Knowledge {
    Unknown,
    ExploredFree,
    ExploredObstacle,
}

/// What the agent knows about the scene. Planning over this map treats only
/// `ExploredFree` cells as passable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationMap {
    width: usize,
    height: usize,
    labels: Vec<Knowledge>,
}

impl Traversable for ExplorationMap {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn is_passable(&self, cell: GridCell) -> bool {
        self.get(cell) == Some(Knowledge::ExploredFree)
    }
}

impl ExplorationMap {
    pub fn unknown(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![Knowledge::Unknown; width * height] }
    }

    pub fn for_scene(scene: &Scene) -> Self {
        Self::unknown(scene.width(), scene.height())
    }

    /// Build a map from explicit labels, row-major.
    pub fn from_labels(width: usize, height: usize, labels: Vec<Knowledge>) -> Self {
        assert_eq!(labels.len(), width * height, "label count must match dimensions");
        Self { width, height, labels }
    }

    pub fn labels(&self) -> &[Knowledge] {
        &self.labels
    }

    pub fn get(&self, cell: GridCell) -> Option<Knowledge> {
        self.contains(cell).then(|| self.labels[self.index_of(cell)])
    }

    pub fn explored_count(&self) -> usize {
        self.labels.iter().filter(|&&k| k != Knowledge::Unknown).count()
    }

    /// Mark every visible cell with its ground-truth occupancy. Labels never
    /// revert to `Unknown`.
    pub fn update_explored(&mut self, scene: &Scene, observation: &Observation) {
        for &cell in &observation.visible_cells {
            let label = match scene.cell(cell) {
                Some(Cell::Free) => Knowledge::ExploredFree,
                Some(Cell::Obstacle) => Knowledge::ExploredObstacle,
                None => continue,
            };
            let i = self.index_of(cell);
            self.labels[i] = label;
        }
    }

    pub fn is_frontier_cell(&self, cell: GridCell) -> bool {
        self.get(cell) == Some(Knowledge::ExploredFree)
            && cell.neighbors4(self.width, self.height).any(|n| self.get(n) == Some(Knowledge::Unknown))
    }

    /// Unknown 4-neighbors of `cell`, ordered by `(row, col)`.
    pub fn unknown_neighbors(&self, cell: GridCell) -> Vec<GridCell> {
        let mut v: Vec<_> =
            cell.neighbors4(self.width, self.height).filter(|&n| self.get(n) == Some(Knowledge::Unknown)).collect();
        v.sort();
        v
    }
}

/// An 8-connected cluster of frontier cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier {
    /// Member cells in `(row, col)` order.
    pub cells: Vec<GridCell>,
    pub representative: GridCell,
}

/// Extract frontier clusters.
///
/// A frontier cell is `ExploredFree` with at least one `Unknown` 4-neighbor.
/// Clusters are the 8-connected components of those cells. Each cluster's
/// representative is the member nearest its centroid, ties going to the
/// smallest `(row, col)`. Clusters are returned ordered by representative.
pub fn extract_frontiers(map: &ExplorationMap) -> Vec<Frontier> {
    let (w, h) = (map.width, map.height);
    let is_frontier: Vec<bool> = (0..w * h).map(|i| map.is_frontier_cell(GridCell::new(i / w, i % w))).collect();
    let mut seen = vec![false; w * h];
    let mut frontiers = Vec::new();

    for start in 0..w * h {
        if !is_frontier[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cells = vec![];
        let mut queue = VecDeque::from([GridCell::new(start / w, start % w)]);
        while let Some(cell) = queue.pop_front() {
            cells.push(cell);
            for n in cell.neighbors8(w, h) {
                let i = n.row * w + n.col;
                if is_frontier[i] && !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        cells.sort();
        let representative = centroid_nearest(&cells);
        frontiers.push(Frontier { cells, representative });
    }
    frontiers.sort_by_key(|f| f.representative);
    frontiers
}

fn centroid_nearest(cells: &[GridCell]) -> GridCell {
    let n = cells.len() as f64;
    let mr = cells.iter().map(|c| c.row as f64).sum::<f64>() / n;
    let mc = cells.iter().map(|c| c.col as f64).sum::<f64>() / n;
    let d2 = |c: &GridCell| (c.row as f64 - mr).powi(2) + (c.col as f64 - mc).powi(2);
    // `cells` is sorted, so the first minimum wins ties.
    *cells
        .iter()
        .min_by(|a, b| d2(a).partial_cmp(&d2(b)).expect("finite distances"))
        .expect("frontier clusters are non-empty")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("exploration exhausted: no frontier left")]
    ExplorationExhausted,
    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(String),
}

/// Epsilon-greedy frontier choice; returns an index into `frontiers`.
///
/// `costs[i]` prices `frontiers[i]`; `f64::INFINITY` marks an unreachable
/// frontier, which is only considered when every frontier is unreachable.
/// One uniform draw decides the branch: below `epsilon`, a frontier is drawn
/// uniformly from candidates costing strictly more than the minimum; otherwise
/// (or when no such candidate exists) the cheapest frontier is returned,
/// ties going to the smallest representative.
pub fn select_subgoal(frontiers: &[Frontier], costs: &[f64], epsilon: f64, rng: &mut Rng) -> Result<usize, SelectError> {
    if frontiers.is_empty() {
        return Err(SelectError::ExplorationExhausted);
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SelectError::InvalidEpsilon(epsilon.to_string()));
    }
    assert_eq!(frontiers.len(), costs.len(), "one cost per frontier");

    let mut candidates: Vec<usize> = (0..frontiers.len()).filter(|&i| costs[i].is_finite()).collect();
    if candidates.is_empty() {
        candidates = (0..frontiers.len()).collect();
    }
    let min_cost = candidates.iter().map(|&i| costs[i]).fold(f64::INFINITY, f64::min);
    let best = *candidates
        .iter()
        .filter(|&&i| costs[i] == min_cost || !min_cost.is_finite())
        .min_by_key(|&&i| frontiers[i].representative)
        .expect("at least one candidate");
    let others: Vec<usize> = candidates.iter().copied().filter(|&i| costs[i] > min_cost).collect();

    let explore = rng.next_f64() < epsilon;
    if explore && !others.is_empty() {
        Ok(others[rng.index(others.len())])
    } else {
        Ok(best)
    }
}
