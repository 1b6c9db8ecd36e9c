//! Simulated sensors: aerial semantic camera, range finder, door detector and
//! the local obstacle scan.

use super::{DronePose, WorldError, WorldModel, OBSTACLE_CEILING};
use crate::descent::CameraModel;
use crate::geometry::Vec2;
use crate::grid::{bresenham, Cell, GridFrame};
use crate::semantics::{ClassLabel, SemanticGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Height of the door centre above the ground, metres.
pub const DOOR_CENTER_HEIGHT: f64 = 1.0;

/// Semantic image seen by the downward camera at `pose`.
///
/// The gimbal keeps image columns on world `+x` and rows on world `+y`, so the
/// rendering does not depend on yaw.
pub fn render_aerial(world: &WorldModel, pose: &DronePose, cam: &CameraModel) -> Result<SemanticGrid, WorldError> {
    let h = pose.altitude;
    if !(h > 0.0) {
        return Err(WorldError::NonPositiveAltitude(h));
    }
    let (sx, sy) = cam.ground_scale(h);
    let mut labels = Vec::with_capacity(cam.width * cam.height);
    for v in 0..cam.height {
        let gy = pose.y + (v as f64 - cam.oy) * sy;
        for u in 0..cam.width {
            let gx = pose.x + (u as f64 - cam.ox) * sx;
            labels.push(world.class_at(Vec2::new(gx, gy)).unwrap_or(ClassLabel::Unknown));
        }
    }
    Ok(SemanticGrid::new(cam.width, cam.height, sx, labels).expect("dimensions come from a valid camera"))
}

/// Class directly below the drone, the same label `render_aerial` gives the
/// centre pixel when the optical centre sits on a pixel.
pub fn render_nadir(world: &WorldModel, pose: &DronePose) -> ClassLabel {
    world.class_at(pose.position()).unwrap_or(ClassLabel::Unknown)
}

/// Height above the flat ground.
pub fn range_find(_world: &WorldModel, pose: &DronePose) -> f64 {
    pose.altitude
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Full horizontal field of view, radians.
    pub fov: f64,
    pub max_range: f64,
    /// Largest angle between the wall normal and the line of sight, radians.
    pub max_incidence: f64,
    pub miss_probability: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            fov: PI / 8.0,
            max_range: 9.0,
            max_incidence: 75f64.to_radians(),
            miss_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoorDetection {
    pub door_point: Vec2,
    pub wall_normal: Vec2,
    pub source_pose: DronePose,
}

/// Geometric door detector with the default incidence limit.
pub fn detect_door(world: &WorldModel, pose: &DronePose, fov: f64, max_range: f64) -> Option<DoorDetection> {
    let cfg = DetectorConfig {
        fov,
        max_range,
        ..DetectorConfig::default()
    };
    detect_door_geometric(world, pose, &cfg)
}

fn detect_door_geometric(world: &WorldModel, pose: &DronePose, cfg: &DetectorConfig) -> Option<DoorDetection> {
    let door = &world.door;
    let to_door = door.center - pose.position();
    let dz = pose.altitude - DOOR_CENTER_HEIGHT;
    let range = (to_door.dot(to_door) + dz * dz).sqrt();
    if range > cfg.max_range || to_door.norm() < 1e-9 {
        return None;
    }
    let bearing = crate::geometry::normalize_angle(to_door.angle() - pose.yaw);
    if bearing.abs() > cfg.fov / 2.0 {
        return None;
    }
    // the drone must be in front of the wall and not too oblique
    let back = (pose.position() - door.center).normalized()?;
    if back.dot(door.normal) <= 0.0 || back.dot(door.normal).acos() >= cfg.max_incidence {
        return None;
    }
    // sight line ends just outside the wall so the wall itself does not occlude
    if !world.line_of_sight(pose.position(), door.center + door.normal * 0.05) {
        return None;
    }
    Some(DoorDetection {
        door_point: door.center,
        wall_normal: door.normal,
        source_pose: *pose,
    })
}

/// Door detector with an optional seeded miss rate; counts its queries.
#[derive(Debug, Clone)]
pub struct DoorDetector {
    pub config: DetectorConfig,
    rng: ChaCha8Rng,
    queries: usize,
}

impl DoorDetector {
    pub fn new(config: DetectorConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queries: 0,
        }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn query(&mut self, world: &WorldModel, pose: &DronePose) -> Option<DoorDetection> {
        self.queries += 1;
        let hit = detect_door_geometric(world, pose, &self.config)?;
        if self.config.miss_probability > 0.0 && self.rng.random::<f64>() < self.config.miss_probability {
            return None;
        }
        Some(hit)
    }
}

/// Ground-truth obstacle raster sampled on a grid frame.
#[derive(Debug, Clone)]
pub struct ObstacleRaster {
    pub frame: GridFrame,
    blocked: Vec<bool>,
}

/// Cells seen by one scan, split by what was observed there.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanResult {
    pub free: Vec<Cell>,
    pub occupied: Vec<Cell>,
}

impl ObstacleRaster {
    pub fn new(world: &WorldModel, frame: GridFrame) -> Self {
        let mut blocked = vec![false; frame.len()];
        let res = frame.resolution;
        for r in world.blocking_rects() {
            // cells whose sample point lies in the half-open rectangle
            let c0 = ((r.min.x - frame.origin.x) / res).ceil().max(0.0) as usize;
            let r0 = ((r.min.y - frame.origin.y) / res).ceil().max(0.0) as usize;
            let c1 = ((r.max.x - frame.origin.x) / res).ceil().min(frame.width as f64);
            let r1 = ((r.max.y - frame.origin.y) / res).ceil().min(frame.height as f64);
            if c1 <= 0.0 || r1 <= 0.0 {
                continue;
            }
            for row in r0..r1 as usize {
                for col in c0..c1 as usize {
                    if r.contains(frame.to_world((col, row))) {
                        blocked[row * frame.width + col] = true;
                    }
                }
            }
        }
        Self { frame, blocked }
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.frame.index(cell)]
    }

    /// Cells within `radius` of the drone that a ray from the drone reaches
    /// before hitting an obstacle. Nothing is sensed above the obstacle ceiling.
    pub fn scan(&self, pose: &DronePose, radius: f64) -> ScanResult {
        let mut out = ScanResult::default();
        if pose.altitude >= OBSTACLE_CEILING || radius <= 0.0 {
            return out;
        }
        let Some(start) = self.frame.to_cell(pose.position()) else {
            return out;
        };
        let s = (start.0 as i64, start.1 as i64);
        for cell in self.frame.cells_within(pose.position(), radius) {
            let ray = bresenham(s, (cell.0 as i64, cell.1 as i64));
            let inner = if ray.len() > 2 { &ray[1..ray.len() - 1] } else { &[][..] };
            let clear = inner
                .iter()
                .all(|&(c, r)| !self.blocked[r as usize * self.frame.width + c as usize]);
            if !clear {
                continue;
            }
            if self.is_blocked(cell) {
                out.occupied.push(cell);
            } else {
                out.free.push(cell);
            }
        }
        out
    }
}

/// Obstacle cells of `frame` visible from `pose` within `radius`.
pub fn local_obstacle_scan(world: &WorldModel, pose: &DronePose, radius: f64, frame: &GridFrame) -> Vec<Cell> {
    ObstacleRaster::new(world, *frame).scan(pose, radius).occupied
}
