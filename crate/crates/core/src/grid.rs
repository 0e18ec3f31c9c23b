//! Cell addressing shared by scenes, exploration maps and the planner.
//!
//! Cells are addressed by `(row, col)`. Metric positions use `x` along
//! columns and `y` along rows, so the center of cell `(r, c)` sits at
//! `((c + 0.5) * cell_size, (r + 0.5) * cell_size)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn center(self, cell_size: f64) -> (f64, f64) {
        ((self.col as f64 + 0.5) * cell_size, (self.row as f64 + 0.5) * cell_size)
    }

    /// Cell containing a metric position, if it lies inside a `height x width` grid.
    pub fn from_position(x: f64, y: f64, cell_size: f64, width: usize, height: usize) -> Option<Self> {
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        let col = (x / cell_size).floor() as usize;
        let row = (y / cell_size).floor() as usize;
        (row < height && col < width).then_some(Self { row, col })
    }

    /// In-bounds 4-neighbors, ordered by `(row, col)`.
    pub fn neighbors4(self, width: usize, height: usize) -> impl Iterator<Item = GridCell> {
        let GridCell { row, col } = self;
        [
            (row.wrapping_sub(1), col),
            (row, col.wrapping_sub(1)),
            (row, col + 1),
            (row + 1, col),
        ]
        .into_iter()
        .filter(move |&(r, c)| r < height && c < width)
        .map(|(r, c)| GridCell::new(r, c))
    }

    /// In-bounds 8-neighbors, ordered by `(row, col)`.
    pub fn neighbors8(self, width: usize, height: usize) -> impl Iterator<Item = GridCell> {
        let GridCell { row, col } = self;
        (0..3usize)
            .flat_map(move |dr| (0..3usize).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| !(dr == 1 && dc == 1))
            .map(move |(dr, dc)| ((row + dr).wrapping_sub(1), (col + dc).wrapping_sub(1)))
            .filter(move |&(r, c)| r < height && c < width)
            .map(|(r, c)| GridCell::new(r, c))
    }
}

/// A rectangular grid with a passability predicate.
pub trait Traversable {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn is_passable(&self, cell: GridCell) -> bool;

    fn contains(&self, cell: GridCell) -> bool {
        cell.row < self.height() && cell.col < self.width()
    }

    fn index_of(&self, cell: GridCell) -> usize {
        cell.row * self.width() + cell.col
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_respect_bounds() {
        let corner: Vec<_> = GridCell::new(0, 0).neighbors4(3, 3).collect();
        assert_eq!(corner, vec![GridCell::new(0, 1), GridCell::new(1, 0)]);
        assert_eq!(GridCell::new(1, 1).neighbors8(3, 3).count(), 8);
        assert_eq!(GridCell::new(2, 2).neighbors8(3, 3).count(), 3);
    }

    #[test]
    fn position_round_trip() {
        let cell = GridCell::new(3, 5);
        let (x, y) = cell.center(0.25);
        assert_eq!(GridCell::from_position(x, y, 0.25, 8, 8), Some(cell));
        assert_eq!(GridCell::from_position(-0.1, 0.0, 0.25, 8, 8), None);
        assert_eq!(GridCell::from_position(2.0, 0.0, 0.25, 8, 8), None);
    }
}
