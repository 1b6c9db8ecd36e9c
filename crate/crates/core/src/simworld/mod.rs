//! Procedural ground-truth worlds, simulated sensors and drone kinematics.

mod generate;
mod kinematics;
mod sensors;

pub use generate::{generate_world, GeneratorParams};
pub use kinematics::{path_length, step_drone, step_drone_limited, Flight, TimedPose, VelocityCommand, MAX_SPEED};
pub use sensors::{
    detect_door, local_obstacle_scan, range_find, render_aerial, render_nadir, DetectorConfig,
    DoorDetection, DoorDetector, ObstacleRaster, ScanResult,
};

use crate::descent::DeliveryTarget;
use crate::geometry::{normalize_angle, Polygon, Rect, Vec2};
use crate::semantics::ClassLabel;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Version tag written into every serialized world.
pub const WORLD_SCHEMA: &str = "doorstep.world.v1";

/// Nothing below this altitude can fly over obstacles; above it the drone is
/// clear of every roof, tree and fence.
pub const OBSTACLE_CEILING: f64 = 10.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no valid world after {attempts} attempts (seed {seed})")]
    RetriesExhausted { seed: u64, attempts: usize },
    #[error("altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
    #[error("unsupported world schema `{0}`")]
    Schema(String),
    #[error("region is not an axis-aligned rectangle")]
    NotARectangle,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DronePose {
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
    pub yaw: f64,
}

impl DronePose {
    pub fn new(x: f64, y: f64, altitude: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            altitude: altitude.max(0.0),
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorMode {
    /// Door on the facade, visible from the front yard.
    Open,
    /// Door at the back of a porch notch, visible only from a narrow cone.
    Recessed,
    /// Recessed door whose porch mouth is fenced off.
    Enclosed,
}

impl DoorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DoorMode::Open => "open",
            DoorMode::Recessed => "recessed",
            DoorMode::Enclosed => "enclosed",
        }
    }
}

impl std::str::FromStr for DoorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(DoorMode::Open),
            "recessed" => Ok(DoorMode::Recessed),
            "enclosed" => Ok(DoorMode::Enclosed),
            _ => Err(format!("unknown door mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub center: Vec2,
    pub width: f64,
    /// Outward unit normal of the wall the door sits in.
    pub normal: Vec2,
    pub mode: DoorMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct House {
    /// Disjoint roof rectangles.
    pub footprint: Vec<Rect>,
    pub center: Vec2,
    /// Unit vector from the house towards its street side.
    pub front: Vec2,
}

impl House {
    pub fn bounds(&self) -> Rect {
        let mut r = self.footprint[0];
        for f in &self.footprint[1..] {
            r = Rect::new(
                r.min.x.min(f.min.x),
                r.min.y.min(f.min.y),
                r.max.x.max(f.max.x),
                r.max.y.max(f.max.y),
            );
        }
        r
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.footprint.iter().any(|r| r.contains(p))
    }

    pub fn area(&self) -> f64 {
        self.footprint.iter().map(Rect::area).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub class: ClassLabel,
    pub rect: Rect,
}

/// Ground-truth scene on a flat metric plane.
///
/// `regions` are pairwise disjoint; any in-bounds point not covered by one is
/// grass.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub seed: u64,
    pub bounds: Rect,
    pub house: House,
    pub neighbors: Vec<House>,
    pub door: Door,
    pub lot: Rect,
    pub regions: Vec<Region>,
    pub front_yard: Polygon,
    pub back_yard: Polygon,
    pub front_paved: Polygon,
    pub gps_start: Vec2,
    pub start_altitude: f64,
    pub start_yaw: f64,
}

impl WorldModel {
    /// Ground-truth class at `p`, `None` outside the world.
    pub fn class_at(&self, p: Vec2) -> Option<ClassLabel> {
        if !self.bounds.contains(p) {
            return None;
        }
        Some(
            self.regions
                .iter()
                .find(|r| r.rect.contains(p))
                .map_or(ClassLabel::Grass, |r| r.class),
        )
    }

    pub fn blocking_rects(&self) -> impl Iterator<Item = &Rect> + '_ {
        self.regions.iter().filter(|r| r.class.is_blocking()).map(|r| &r.rect)
    }

    /// Distance from `p` to the nearest roof or obstacle (0 inside one).
    pub fn obstacle_clearance(&self, p: Vec2) -> f64 {
        self.blocking_rects()
            .map(|r| r.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the drone at `pose` is clear of every obstacle it could hit.
    pub fn is_collision_free(&self, pose: &DronePose) -> bool {
        pose.altitude >= OBSTACLE_CEILING || self.obstacle_clearance(pose.position()) > 0.0
    }

    /// No roof or obstacle interior crosses the segment `a -> b`.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        !self.blocking_rects().any(|r| r.intersects_segment(a, b))
    }

    /// Ground-truth front/back side of a point relative to the recipient house.
    pub fn is_front_side(&self, p: Vec2) -> bool {
        (p - self.house.center).dot(self.house.front) >= 0.0
    }

    pub fn roofs(&self) -> impl Iterator<Item = &House> + '_ {
        std::iter::once(&self.house).chain(self.neighbors.iter())
    }

    /// Scoring rule: whether a delivery or descent point lies in the
    /// ground-truth region for `target`.
    pub fn in_target_region(&self, p: Vec2, target: DeliveryTarget) -> bool {
        match target {
            DeliveryTarget::FrontDoor | DeliveryTarget::FrontPavedArea => {
                self.front_paved.contains(p) && self.class_at(p) == Some(ClassLabel::PavedArea)
            }
            DeliveryTarget::FrontYard => {
                self.front_yard.contains(p) && self.class_at(p) == Some(ClassLabel::Grass)
            }
            DeliveryTarget::BackYard => {
                self.back_yard.contains(p) && self.class_at(p) == Some(ClassLabel::Grass)
            }
        }
    }

    /// Whether `p` lies inside the footprint of the recipient's house (with margin).
    pub fn is_recipient_roof(&self, p: Vec2, margin: f64) -> bool {
        self.house.footprint.iter().any(|r| r.expanded(margin).contains(p))
    }

    pub fn to_json(&self) -> Result<String, WorldError> {
        Ok(serde_json::to_string_pretty(&WorldJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let doc: WorldJson = serde_json::from_str(text)?;
        WorldModel::try_from(doc)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        std::fs::write(path, self.to_json()?).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

// JSON document: every rectangle is written as its four-vertex polygon.

#[derive(Serialize, Deserialize)]
struct WorldJson {
    schema: String,
    seed: u64,
    bounds: Polygon,
    house: HouseJson,
    neighbors: Vec<HouseJson>,
    door: Door,
    lot: Polygon,
    regions: Vec<RegionJson>,
    front_yard: Polygon,
    back_yard: Polygon,
    front_paved: Polygon,
    gps_start: Vec2,
    start_altitude: f64,
    start_yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct HouseJson {
    footprint: Vec<Polygon>,
    center: Vec2,
    front: Vec2,
}

#[derive(Serialize, Deserialize)]
struct RegionJson {
    class: ClassLabel,
    polygon: Polygon,
}

fn rect_of(p: &Polygon) -> Result<Rect, WorldError> {
    if p.vertices.len() != 4 {
        return Err(WorldError::NotARectangle);
    }
    let xs = p.vertices.iter().map(|v| v.x);
    let ys = p.vertices.iter().map(|v| v.y);
    let (x0, x1) = xs.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let r = Rect::new(x0, y0, x1, y1);
    // every vertex must be a corner
    let ok = p
        .vertices
        .iter()
        .all(|v| (v.x == x0 || v.x == x1) && (v.y == y0 || v.y == y1));
    if !ok || r.area() <= 0.0 {
        return Err(WorldError::NotARectangle);
    }
    Ok(r)
}

impl From<&House> for HouseJson {
    fn from(h: &House) -> Self {
        HouseJson {
            footprint: h.footprint.iter().map(|&r| r.into()).collect(),
            center: h.center,
            front: h.front,
        }
    }
}

impl TryFrom<HouseJson> for House {
    type Error = WorldError;
    fn try_from(h: HouseJson) -> Result<Self, WorldError> {
        if h.footprint.is_empty() {
            return Err(WorldError::NotARectangle);
        }
        Ok(House {
            footprint: h.footprint.iter().map(rect_of).collect::<Result<_, _>>()?,
            center: h.center,
            front: h.front,
        })
    }
}

impl From<&WorldModel> for WorldJson {
    fn from(w: &WorldModel) -> Self {
        WorldJson {
            schema: WORLD_SCHEMA.to_string(),
            seed: w.seed,
            bounds: w.bounds.into(),
            house: (&w.house).into(),
            neighbors: w.neighbors.iter().map(HouseJson::from).collect(),
            door: w.door,
            lot: w.lot.into(),
            regions: w
                .regions
                .iter()
                .map(|r| RegionJson {
                    class: r.class,
                    polygon: r.rect.into(),
                })
                .collect(),
            front_yard: w.front_yard.clone(),
            back_yard: w.back_yard.clone(),
            front_paved: w.front_paved.clone(),
            gps_start: w.gps_start,
            start_altitude: w.start_altitude,
            start_yaw: w.start_yaw,
        }
    }
}

impl TryFrom<WorldJson> for WorldModel {
    type Error = WorldError;
    fn try_from(d: WorldJson) -> Result<Self, WorldError> {
        if d.schema != WORLD_SCHEMA {
            return Err(WorldError::Schema(d.schema));
        }
        Ok(WorldModel {
            seed: d.seed,
            bounds: rect_of(&d.bounds)?,
            house: d.house.try_into()?,
            neighbors: d.neighbors.into_iter().map(House::try_from).collect::<Result<_, _>>()?,
            door: d.door,
            lot: rect_of(&d.lot)?,
            regions: d
                .regions
                .iter()
                .map(|r| {
                    Ok(Region {
                        class: r.class,
                        rect: rect_of(&r.polygon)?,
                    })
                })
                .collect::<Result<_, WorldError>>()?,
            front_yard: d.front_yard,
            back_yard: d.back_yard,
            front_paved: d.front_paved,
            gps_start: d.gps_start,
            start_altitude: d.start_altitude,
            start_yaw: d.start_yaw,
        })
    }
}
