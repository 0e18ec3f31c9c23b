//! Agent kinematics, visibility and success testing.
//!
//! The agent lives on the ground plane of a [`Scene`]: `x` runs along grid
//! columns, `y` along grid rows and `z` is the vertical axis (always 0).
//! Heading is a yaw about `z`, measured counter-clockwise from `+x`, and is
//! carried as a unit quaternion so recorded poses keep all six degrees of
//! freedom.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridCell, Traversable};
use crate::scene::Scene;

/// Distance from the target at which an episode counts as successful.
pub const SUCCESS_RADIUS_M: f64 = 1.0;
pub const DEFAULT_FORWARD_M: f64 = 0.25;
pub const DEFAULT_TURN_DEG: f64 = 30.0;
pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const DEFAULT_RANGE_M: f64 = 5.0;

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::MoveForward => "MOVE_FORWARD",
            Action::TurnLeft => "TURN_LEFT",
            Action::TurnRight => "TURN_RIGHT",
            Action::Stop => "STOP",
        })
    }
}

/// Magnitudes of the discrete actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionParams {
    pub forward_m: f64,
    pub turn_deg: f64,
}

impl Default for ActionParams {
    fn default() -> Self {
        Self { forward_m: DEFAULT_FORWARD_M, turn_deg: DEFAULT_TURN_DEG }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn from_yaw(yaw: f64) -> Self {
        let half = 0.5 * yaw;
        Self { w: half.cos(), x: 0.0, y: 0.0, z: half.sin() }.canonical()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// `q` and `-q` encode the same rotation; pick the one whose first
    /// non-negligible component is positive.
    pub fn canonical(self) -> Self {
        let lead = [self.w, self.x, self.y, self.z].into_iter().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if lead < 0.0 {
            Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        }
    }

    /// Rotation about the vertical axis, in `[0, 2*pi)`.
    pub fn yaw(&self) -> f64 {
        let siny = 2.0 * (self.w * self.z + self.x * self.y);
        let cosy = 1.0 - 2.0 * (self.y * self.y + self.z * self.z);
        siny.atan2(cosy).rem_euclid(2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { position: Vec3 { x, y, z: 0.0 }, orientation: Quaternion::from_yaw(yaw) }
    }

    pub fn at_cell(cell: GridCell, cell_size: f64, yaw: f64) -> Self {
        let (x, y) = cell.center(cell_size);
        Self::new(x, y, yaw)
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.position.x, self.position.y)
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.yaw()
    }

    pub fn cell(&self, scene: &Scene) -> Option<GridCell> {
        scene.cell_at(self.position.x, self.position.y)
    }

    /// Unit quaternion and a position on a free cell.
    pub fn is_valid_in(&self, scene: &Scene) -> bool {
        (self.orientation.norm() - 1.0).abs() <= UNIT_TOLERANCE
            && scene.is_free_position(self.position.x, self.position.y)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.position.x - x).hypot(self.position.y - y).hypot(self.position.z)
    }
}

/// Apply one discrete action.
///
/// `MoveForward` that would end on an obstacle or outside the grid leaves
/// the pose unchanged. Turns rotate about the vertical axis and renormalize.
pub fn step(scene: &Scene, pose: &Pose, action: Action, params: &ActionParams) -> Pose {
    match action {
        Action::Stop => *pose,
        Action::MoveForward => {
            let yaw = pose.yaw();
            let x = pose.position.x + params.forward_m * yaw.cos();
            let y = pose.position.y + params.forward_m * yaw.sin();
            if scene.is_free_position(x, y) {
                Pose { position: Vec3 { x, y, z: pose.position.z }, orientation: pose.orientation }
            } else {
                *pose
            }
        }
        Action::TurnLeft | Action::TurnRight => {
            let sign = if action == Action::TurnLeft { 1.0 } else { -1.0 };
            let delta = Quaternion::from_yaw(sign * params.turn_deg.to_radians());
            let orientation = pose.orientation.mul(&delta).normalized().canonical();
            Pose { position: pose.position, orientation }
        }
    }
}

pub fn check_success(pose: &Pose, target_x: f64, target_y: f64) -> bool {
    pose.distance_to(target_x, target_y) <= SUCCESS_RADIUS_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub object_id: String,
    pub category: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Visible cells in `(row, col)` order.
    pub visible_cells: Vec<GridCell>,
    pub visible_objects: Vec<VisibleObject>,
    pub pose: Pose,
    pub frame_index: usize,
}

impl Observation {
    pub fn sees_category(&self, category: &str) -> bool {
        self.visible_objects.iter().any(|o| o.category == category)
    }
}

/// Cells whose closed squares the segment `from -> to` touches, in
/// traversal order. Coordinates are in cell units.
///
/// This is Amanatides-Woo traversal extended to a supercover: when the
/// segment passes exactly through a grid corner, both side cells sharing
/// that corner are emitted before the diagonal cell.
pub fn supercover(from: (f64, f64), to: (f64, f64)) -> Vec<(i64, i64)> {
    const CORNER_EPS: f64 = 1e-12;
    let (x0, y0) = from;
    let (x1, y1) = to;
    let (mut cx, mut cy) = (x0.floor() as i64, y0.floor() as i64);
    let (ex, ey) = (x1.floor() as i64, y1.floor() as i64);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_x = if dx > 0.0 {
        (cx as f64 + 1.0 - x0) / dx
    } else if dx < 0.0 {
        (x0 - cx as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_y = if dy > 0.0 {
        (cy as f64 + 1.0 - y0) / dy
    } else if dy < 0.0 {
        (y0 - cy as f64) / -dy
    } else {
        f64::INFINITY
    };

    let mut out = vec![(cx, cy)];
    let max_steps = (ex - cx).abs() + (ey - cy).abs() + 2;
    for _ in 0..max_steps {
        if (cx, cy) == (ex, ey) {
            break;
        }
        if (t_x - t_y).abs() <= CORNER_EPS {
            if t_x > 1.0 {
                break;
            }
            out.push((cx + step_x, cy));
            out.push((cx, cy + step_y));
            cx += step_x;
            cy += step_y;
            t_x += delta_x;
            t_y += delta_y;
        } else if t_x < t_y {
            if t_x > 1.0 {
                break;
            }
            cx += step_x;
            t_x += delta_x;
        } else {
            if t_y > 1.0 {
                break;
            }
            cy += step_y;
            t_y += delta_y;
        }
        out.push((cx, cy));
    }
    out
}

fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

/// Symbolic first-person observation.
///
/// A cell is visible when its center lies within `range_m`, within
/// `fov_degrees / 2` of the heading, and the segment from the agent to that
/// center crosses no obstacle cell other than the target cell itself (see
/// [`supercover`]). Obstacle cells can be visible; objects are reported for
/// visible cells, ordered by object id.
pub fn observe(scene: &Scene, pose: &Pose, fov_degrees: f64, range_m: f64) -> Observation {
    let cs = scene.cell_size();
    let (px, py) = pose.xy();
    let yaw = pose.yaw();
    let half_fov = 0.5 * fov_degrees.to_radians();
    let reach = (range_m / cs).ceil() as i64 + 1;
    let (acol, arow) = ((px / cs).floor() as i64, (py / cs).floor() as i64);
    let (w, h) = (scene.width() as i64, scene.height() as i64);

    let mut visible = Vec::new();
    for row in (arow - reach).max(0)..=(arow + reach).min(h - 1) {
        for col in (acol - reach).max(0)..=(acol + reach).min(w - 1) {
            let cell = GridCell::new(row as usize, col as usize);
            let (cx, cy) = cell.center(cs);
            let dist = (cx - px).hypot(cy - py);
            if dist > range_m {
                continue;
            }
            if dist > 1e-9 && fov_degrees < 360.0 && angle_diff((cy - py).atan2(cx - px), yaw).abs() > half_fov + 1e-9 {
                continue;
            }
            let blocked = supercover((px / cs, py / cs), (cx / cs, cy / cs)).into_iter().any(|(c, r)| {
                (r, c) != (row, col) && (r < 0 || c < 0 || r >= h || c >= w || !scene.is_passable(GridCell::new(r as usize, c as usize)))
            });
            if !blocked {
                visible.push(cell);
            }
        }
    }

    let mut visible_objects: Vec<VisibleObject> = scene
        .objects()
        .iter()
        .filter(|o| scene.cell_at(o.x, o.y).is_some_and(|c| visible.binary_search(&c).is_ok()))
        .map(|o| VisibleObject { object_id: o.object_id.clone(), category: o.category.clone(), x: o.x, y: o.y })
        .collect();
    visible_objects.sort_by(|a, b| a.object_id.cmp(&b.object_id));

    Observation { visible_cells: visible, visible_objects, pose: *pose, frame_index: 0 }
}

#[derive(Debug, Error)]
#[error("malformed pose text {0:?}")]
pub struct PoseParseError(pub String);

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

/// Render a pose as `P=(x,y,z) Q=(w,qx,qy,qz)`, three decimals each.
pub fn serialize_pose(pose: &Pose) -> String {
    let p = pose.position;
    let q = pose.orientation;
    format!(
        "P=({},{},{}) Q=({},{},{},{})",
        fmt3(p.x),
        fmt3(p.y),
        fmt3(p.z),
        fmt3(q.w),
        fmt3(q.x),
        fmt3(q.y),
        fmt3(q.z)
    )
}

pub fn parse_pose(text: &str) -> Result<Pose, PoseParseError> {
    let err = || PoseParseError(text.to_string());
    let (p, q) = text.split_once(' ').ok_or_else(err)?;
    let nums = |s: &str, prefix: &str| -> Result<Vec<f64>, PoseParseError> {
        s.strip_prefix(prefix)
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(err)?
            .split(',')
            .map(|n| n.parse::<f64>().map_err(|_| err()))
            .collect()
    };
    let p = nums(p, "P=(")?;
    let q = nums(q, "Q=(")?;
    if p.len() != 3 || q.len() != 4 {
        return Err(err());
    }
    Ok(Pose {
        position: Vec3 { x: p[0], y: p[1], z: p[2] },
        orientation: Quaternion { w: q[0], x: q[1], y: q[2], z: q[3] },
    })
}

/// Whitespace-delimited chunks of the serialized pose.
pub fn pose_text_token_estimate(text: &str) -> usize {
    text.split_whitespace().count()
}
