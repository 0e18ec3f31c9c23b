#![allow(dead_code)]

use lifenav_core::frontier::{ExplorationMap, Knowledge};
use lifenav_core::rng::Rng;
use lifenav_core::scene::{Cell, Scene};

/// Scene with iid obstacles and no objects; connectivity is not enforced.
pub fn random_grid(rng: &mut Rng, width: usize, height: usize, density: f64) -> Scene {
    let cells = (0..width * height).map(|_| if rng.next_f64() < density { Cell::Obstacle } else { Cell::Free }).collect();
    Scene::new("grid", width, height, 0.25, cells, vec![]).expect("random grid has a free cell")
}

/// Exploration map with each label drawn with the given weights.
pub fn random_map(rng: &mut Rng, width: usize, height: usize, p_unknown: f64, p_obstacle: f64) -> ExplorationMap {
    let labels = (0..width * height)
        .map(|_| {
            let u = rng.next_f64();
            if u < p_unknown {
                Knowledge::Unknown
            } else if u < p_unknown + p_obstacle {
                Knowledge::ExploredObstacle
            } else {
                Knowledge::ExploredFree
            }
        })
        .collect();
    ExplorationMap::from_labels(width, height, labels)
}
