//! Deterministic 4-connected shortest paths over any [`Traversable`] grid.

use std::collections::VecDeque;

use thiserror::Error;

use crate::grid::{GridCell, Traversable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("cell ({row}, {col}) is outside the grid")]
    OutOfBounds { row: usize, col: usize },
    #[error("position ({0}, {1}) is outside the grid")]
    PositionOutOfBounds(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<GridCell>,
    pub length_m: f64,
}

impl Path {
    pub fn steps(&self) -> usize {
        self.waypoints.len() - 1
    }
}

/// Hop counts to the nearest source cell over passable cells.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    hops: Vec<Option<u32>>,
}

impl DistanceField {
    /// Breadth-first flood from every passable, in-bounds source.
    pub fn from_sources<G: Traversable + ?Sized>(grid: &G, sources: impl IntoIterator<Item = GridCell>) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut hops = vec![None; w * h];
        let mut queue = VecDeque::new();
        for s in sources {
            if grid.contains(s) && grid.is_passable(s) && hops[s.row * w + s.col].is_none() {
                hops[s.row * w + s.col] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(cell) = queue.pop_front() {
            let d = hops[cell.row * w + cell.col].expect("queued cells are labelled");
            for n in cell.neighbors4(w, h) {
                let i = n.row * w + n.col;
                if hops[i].is_none() && grid.is_passable(n) {
                    hops[i] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        Self { width: w, hops }
    }

    pub fn hops(&self, cell: GridCell) -> Option<u32> {
        if cell.col >= self.width {
            return None;
        }
        self.hops.get(cell.row * self.width + cell.col).copied().flatten()
    }
}

fn check_bounds<G: Traversable + ?Sized>(grid: &G, cell: GridCell) -> Result<(), PlanError> {
    if grid.contains(cell) {
        Ok(())
    } else {
        Err(PlanError::OutOfBounds { row: cell.row, col: cell.col })
    }
}

/// Minimum-length 4-connected path, or `None` when the goal is unreachable.
///
/// Among equally short paths the one with the lexicographically smallest
/// waypoint sequence is returned: distances to the goal are flooded first,
/// then the walk from the start always steps to the smallest neighbor that is
/// one hop closer.
pub fn shortest_path<G: Traversable + ?Sized>(
    grid: &G,
    start: GridCell,
    goal: GridCell,
    cell_size: f64,
) -> Result<Option<Path>, PlanError> {
    check_bounds(grid, start)?;
    check_bounds(grid, goal)?;
    if start == goal {
        return Ok(Some(Path { waypoints: vec![start], length_m: 0.0 }));
    }
    let field = DistanceField::from_sources(grid, [goal]);
    let Some(mut remaining) = field.hops(start) else {
        return Ok(None);
    };
    let (w, h) = (grid.width(), grid.height());
    let mut waypoints = Vec::with_capacity(remaining as usize + 1);
    let mut cell = start;
    waypoints.push(cell);
    while remaining > 0 {
        // neighbors4 yields cells in (row, col) order.
        cell = cell
            .neighbors4(w, h)
            .find(|&n| field.hops(n) == Some(remaining - 1))
            .expect("a closer neighbor exists on a shortest path");
        waypoints.push(cell);
        remaining -= 1;
    }
    let length_m = (waypoints.len() - 1) as f64 * cell_size;
    Ok(Some(Path { waypoints, length_m }))
}

/// Shortest traversable distance in meters between two positions.
///
/// Positions in the same cell are separated by their straight-line distance.
/// Otherwise the result is the cell-path length plus the straight-line offset
/// of each position from its own cell center.
pub fn geodesic_distance<G: Traversable + ?Sized>(
    grid: &G,
    cell_size: f64,
    a: (f64, f64),
    b: (f64, f64),
) -> Result<Option<f64>, PlanError> {
    let locate = |p: (f64, f64)| {
        GridCell::from_position(p.0, p.1, cell_size, grid.width(), grid.height())
            .ok_or_else(|| PlanError::PositionOutOfBounds(p.0.to_string(), p.1.to_string()))
    };
    let (ca, cb) = (locate(a)?, locate(b)?);
    if ca == cb {
        return Ok(Some((a.0 - b.0).hypot(a.1 - b.1)));
    }
    let offset = |p: (f64, f64), c: GridCell| {
        let (cx, cy) = c.center(cell_size);
        (p.0 - cx).hypot(p.1 - cy)
    };
    Ok(shortest_path(grid, ca, cb, cell_size)?.map(|path| path.length_m + offset(a, ca) + offset(b, cb)))
}
