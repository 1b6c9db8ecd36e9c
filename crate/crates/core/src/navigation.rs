//! Post-descent door search and approach: yaw sweep, footprint-following
//! search with re-planning against sensed obstacles, and the offset approach.

use crate::geometry::{normalize_angle, Vec2};
use crate::grid::Cell;
use crate::occupancy::{astar, FootprintRing, OccupancyError, OccupancyGrid, Path};
use crate::simworld::{DetectorConfig, DoorDetection, DoorDetector, Flight, ObstacleRaster, TimedPose, WorldModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// Seconds between obstacle scans.
    pub perception_interval: f64,
    pub scan_radius: f64,
    /// Obstacles are grown by this many metres for planning.
    pub inflation: f64,
    pub ring_standoff: f64,
    pub approach_offset: f64,
    pub yaw_step: f64,
    /// Sweep steps on each side of the initial heading.
    pub yaw_sweep_steps: usize,
    /// Re-plans allowed within one leg before giving up.
    pub max_replans: usize,
    /// Roof cells within this radius set the heading while facing the house.
    pub face_radius: f64,
    pub time_cap: f64,
    pub detector: DetectorConfig,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            perception_interval: 0.5,
            scan_radius: 6.0,
            inflation: 0.5,
            ring_standoff: 1.5,
            approach_offset: 1.0,
            yaw_step: PI / 16.0,
            yaw_sweep_steps: 4,
            max_replans: 20,
            face_radius: 3.0,
            time_cap: 300.0,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryStatus {
    Delivered,
    DoorNotFound,
    Timeout,
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub status: DeliveryStatus,
    pub elapsed: f64,
    pub trajectory: Vec<TimedPose>,
    pub detections: Vec<DoorDetection>,
    pub approach_point: Option<Vec2>,
    /// The nominal approach point was blocked and a nearby free one was used.
    pub approach_fallback: bool,
    /// Detector queries made before the footprint search started.
    pub queries_before_ring: usize,
}

impl DeliveryOutcome {
    pub fn new(status: DeliveryStatus, flight: &Flight, time_cap: f64) -> Self {
        let elapsed = if status == DeliveryStatus::Timeout {
            time_cap
        } else {
            flight.time()
        };
        Self {
            status,
            elapsed,
            trajectory: flight.trajectory().to_vec(),
            detections: Vec::new(),
            approach_point: None,
            approach_fallback: false,
            queries_before_ring: 0,
        }
    }
}

/// Turn through the yaw offsets `0, +s, .., +n s, -s, .., -n s` around the
/// current heading, querying the detector at each; the first query is the
/// plain check at the initial heading.
pub fn yaw_sweep_search(
    flight: &mut Flight,
    world: &WorldModel,
    detector: &mut DoorDetector,
    cfg: &MissionConfig,
) -> Option<DoorDetection> {
    let base = flight.pose().yaw;
    let n = cfg.yaw_sweep_steps as i64;
    let offsets = std::iter::once(0).chain(1..=n).chain((1..=n).map(|k| -k));
    for k in offsets {
        let yaw = normalize_angle(base + k as f64 * cfg.yaw_step);
        let pose = flight.pose();
        let (p, alt) = (pose.position(), pose.altitude);
        while !flight.step_toward(p, alt, Some(yaw)) {
            if flight.time() >= cfg.time_cap {
                return None;
            }
        }
        if let Some(d) = detector.query(world, &flight.pose()) {
            return Some(d);
        }
    }
    None
}

/// Walk direction for a closed ring: the one with the shorter expected walk
/// to the front of the house, each waypoint weighted by the square of how far
/// it lies ahead of the roof centroid along `v_front`. Ties and open arcs keep
/// the ring as given.
pub fn orient_ring_frontward(ring: &FootprintRing, c_roof: Vec2, v_front: Vec2) -> FootprintRing {
    let Some(front) = v_front.normalized() else {
        return ring.clone();
    };
    let w = &ring.path.waypoints;
    if !ring.closed || w.len() < 3 {
        return ring.clone();
    }
    let total = ring.loop_length();
    let (mut run, mut fwd, mut wsum) = (0.0, 0.0, 0.0);
    for (i, p) in w.iter().enumerate() {
        if i > 0 {
            run += p.distance(w[i - 1]);
        }
        let ahead = (*p - c_roof).dot(front).max(0.0);
        fwd += ahead * ahead * run;
        wsum += ahead * ahead;
    }
    // walking the other way reaches waypoint i after `total - run_i`
    if wsum > 0.0 && fwd / wsum > total / 2.0 {
        ring.reversed()
    } else {
        ring.clone()
    }
}

/// The delivery pose `offset` metres out from the door along its wall normal.
pub fn door_approach_point(det: &DoorDetection, offset: f64) -> Vec2 {
    det.door_point + det.wall_normal * offset
}

/// `door_approach_point`, or when that cell is not traversable the nearest
/// traversable point along the normal (within 3 m); the flag is set in the
/// latter case.
pub fn resolve_approach_point(det: &DoorDetection, offset: f64, occ: &OccupancyGrid, ok: &[bool]) -> (Vec2, bool) {
    let f = &occ.frame;
    let good = |p: Vec2| f.to_cell(p).is_some_and(|c| ok[f.index(c)]);
    let nominal = door_approach_point(det, offset);
    if good(nominal) {
        return (nominal, false);
    }
    let step = f.resolution;
    let mut k = 1;
    while k as f64 * step <= 3.0 {
        for t in [offset - k as f64 * step, offset + k as f64 * step] {
            if t > 0.0 {
                let p = door_approach_point(det, t);
                if good(p) {
                    return (p, true);
                }
            }
        }
        k += 1;
    }
    (nominal, true)
}

/// Re-plan `current` when sensed obstacles cut its inflated corridor.
///
/// The sensed cells are added to `occ` and a new path is planned from the
/// first waypoint to the goal. Without any sensed cell within `inflation` of a
/// waypoint the path comes back unchanged.
pub fn dynamic_replan(
    current: &Path,
    sensed: &[Cell],
    occ: &OccupancyGrid,
    inflation: f64,
) -> Result<Path, OccupancyError> {
    let f = &occ.frame;
    let (Some(&start), Some(goal)) = (current.waypoints.first(), current.goal()) else {
        return Ok(current.clone());
    };
    let cuts = sensed.iter().any(|&c| {
        let q = f.to_world(c);
        current.waypoints.iter().any(|w| w.distance(q) < inflation)
    });
    if !cuts {
        return Ok(current.clone());
    }
    let overlaid = occ.with_overlay(sensed);
    let ok = overlaid.traversable(inflation);
    let s = f.to_cell(start).ok_or(OccupancyError::OutOfBounds)?;
    let t = f.to_cell(goal).ok_or(OccupancyError::OutOfBounds)?;
    if !ok[f.index(t)] {
        return Err(OccupancyError::Unreachable);
    }
    let mut ok = ok;
    // the drone is already at the start; let it leave even if the new
    // obstacle brushed its cell
    ok[f.index(s)] = true;
    let (cells, _) = astar(f, &ok, s, t).ok_or(OccupancyError::Unreachable)?;
    Ok(Path::new(cells.into_iter().map(|c| f.to_world(c)).collect()))
}

/// Result of one navigation leg.
#[derive(Debug, Clone, PartialEq)]
pub enum Leg {
    Arrived,
    Detected(DoorDetection),
    Timeout,
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Facing {
    /// Look along the direction of travel.
    Motion,
    /// Look at the nearby part of the roof.
    House,
    /// Hold the current heading.
    Hold,
}

/// Point reached by moving `dist` along the polyline `wps[idx..]` from `pos`,
/// and the index of the next unreached waypoint.
pub fn advance_along(pos: Vec2, wps: &[Vec2], mut idx: usize, dist: f64) -> (Vec2, usize) {
    let mut cur = pos;
    let mut left = dist;
    while idx < wps.len() {
        let d = cur.distance(wps[idx]);
        if d <= left {
            left -= d;
            cur = wps[idx];
            idx += 1;
        } else {
            cur = cur + (wps[idx] - cur) * (left / d);
            break;
        }
    }
    (cur, idx)
}

/// Drone, map and sensors for one post-descent mission.
pub struct Navigator<'a> {
    pub flight: &'a mut Flight,
    pub world: &'a WorldModel,
    pub cfg: &'a MissionConfig,
    pub detector: &'a mut DoorDetector,
    base: OccupancyGrid,
    raster: ObstacleRaster,
    sensed: BTreeSet<Cell>,
    ok: Vec<bool>,
    roof_points: Vec<Vec2>,
    pub detections: Vec<DoorDetection>,
    pub replans: usize,
}

impl<'a> Navigator<'a> {
    pub fn new(
        flight: &'a mut Flight,
        world: &'a WorldModel,
        cfg: &'a MissionConfig,
        detector: &'a mut DoorDetector,
        base: OccupancyGrid,
        roof_points: Vec<Vec2>,
    ) -> Self {
        let raster = ObstacleRaster::new(world, base.frame);
        let ok = base.traversable(cfg.inflation);
        Self {
            flight,
            world,
            cfg,
            detector,
            base,
            raster,
            sensed: BTreeSet::new(),
            ok,
            roof_points,
            detections: Vec::new(),
            replans: 0,
        }
    }

    pub fn sensed(&self) -> &BTreeSet<Cell> {
        &self.sensed
    }

    pub fn traversable(&self) -> &[bool] {
        &self.ok
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.base
    }

    fn per_tick(&self) -> u64 {
        ((self.cfg.perception_interval / self.flight.dt).round() as u64).max(1)
    }

    /// Scan for obstacles; returns true when the map changed.
    pub fn sense(&mut self) -> bool {
        let seen = self.raster.scan(&self.flight.pose(), self.cfg.scan_radius).occupied;
        let mut changed = false;
        for c in seen {
            if !self.base.is_occupied(c) && self.sensed.insert(c) {
                changed = true;
            }
        }
        if changed {
            let overlay = self.base.with_overlay(self.sensed.iter());
            self.ok = overlay.traversable(self.cfg.inflation);
        }
        changed
    }

    fn is_ok(&self, p: Vec2) -> bool {
        let f = &self.base.frame;
        f.to_cell(p).is_some_and(|c| self.ok[f.index(c)])
    }

    fn plan(&self, from: Vec2, to: Vec2) -> Option<Vec<Vec2>> {
        let f = &self.base.frame;
        let s = f.to_cell(from)?;
        let t = f.to_cell(to)?;
        if !self.ok[f.index(t)] {
            return None;
        }
        let mut ok = self.ok.clone();
        ok[f.index(s)] = true;
        let (cells, _) = astar(f, &ok, s, t)?;
        Some(cells.into_iter().map(|c| f.to_world(c)).collect())
    }

    fn facing_yaw(&self, facing: Facing, from: Vec2, to: Vec2) -> Option<f64> {
        match facing {
            Facing::Hold => None,
            Facing::Motion => (to - from).normalized().map(|d| d.angle()),
            Facing::House => {
                let r2 = self.cfg.face_radius * self.cfg.face_radius;
                let (mut sum, mut n) = (Vec2::ZERO, 0usize);
                for &q in &self.roof_points {
                    let d = q - from;
                    if d.dot(d) <= r2 {
                        sum = sum + q;
                        n += 1;
                    }
                }
                let target = if n > 0 {
                    sum * (1.0 / n as f64)
                } else {
                    let (mut s, m) = (Vec2::ZERO, self.roof_points.len().max(1));
                    for &q in &self.roof_points {
                        s = s + q;
                    }
                    s * (1.0 / m as f64)
                };
                (target - from).normalized().map(|d| d.angle())
            }
        }
    }

    /// Follow `wps`, scanning for obstacles and re-planning when they block
    /// the remaining waypoints. With `rejoin` a blocked stretch is bypassed
    /// and the walk continues from the first traversable waypoint after it;
    /// otherwise the leg re-plans straight to its final waypoint.
    pub fn follow(&mut self, wps: Vec<Vec2>, facing: Facing, detect: bool, rejoin: bool) -> Leg {
        let mut wps = wps;
        let mut idx = 0;
        let mut replans = 0;
        let per_tick = self.per_tick();
        let step = self.flight.max_speed * self.flight.dt;
        loop {
            if self.flight.time() >= self.cfg.time_cap {
                return Leg::Timeout;
            }
            if self.flight.ticks() % per_tick == 0 && self.sense() {
                let blocked = wps[idx..].iter().position(|&w| !self.is_ok(w)).map(|k| k + idx);
                if let Some(b) = blocked {
                    replans += 1;
                    self.replans += 1;
                    if replans > self.cfg.max_replans {
                        return Leg::Stuck;
                    }
                    match self.reroute(&wps, b, rejoin) {
                        Some(next) => {
                            wps = next;
                            idx = 0;
                        }
                        None => return Leg::Stuck,
                    }
                }
            }
            if detect {
                if let Some(d) = self.detector.query(self.world, &self.flight.pose()) {
                    self.detections.push(d);
                    return Leg::Detected(d);
                }
            }
            if idx >= wps.len() {
                return Leg::Arrived;
            }
            let pose = self.flight.pose();
            let (pt, next_idx) = advance_along(pose.position(), &wps, idx, step);
            let look = if next_idx < wps.len() { wps[next_idx] } else { pt };
            let yaw = self.facing_yaw(facing, pose.position(), look);
            self.flight.step_toward(pt, pose.altitude, yaw);
            idx = next_idx;
        }
    }

    fn reroute(&self, wps: &[Vec2], blocked: usize, rejoin: bool) -> Option<Vec<Vec2>> {
        let here = self.flight.pose().position();
        if !rejoin {
            return self.plan(here, *wps.last()?);
        }
        // candidate rejoin points: the first traversable waypoint after each
        // blocked run
        let mut j = blocked;
        let mut tries = 0;
        while j < wps.len() && tries < self.cfg.max_replans {
            while j < wps.len() && !self.is_ok(wps[j]) {
                j += 1;
            }
            if j >= wps.len() {
                break;
            }
            if let Some(mut detour) = self.plan(here, wps[j]) {
                detour.extend_from_slice(&wps[j + 1..]);
                return Some(detour);
            }
            tries += 1;
            while j < wps.len() && self.is_ok(wps[j]) {
                j += 1;
            }
        }
        None
    }

    /// Plan to `target` and fly there, ending exactly on it.
    pub fn goto(&mut self, target: Vec2, facing: Facing, detect: bool) -> Leg {
        let here = self.flight.pose().position();
        let Some(mut wps) = self.plan(here, target) else {
            return Leg::Stuck;
        };
        wps.push(target);
        self.follow(wps, facing, detect, false)
    }

    /// Walk the footprint ring once while facing the house, stopping at the
    /// first detection.
    pub fn search_ring(&mut self, ring: &FootprintRing) -> Leg {
        let mut order = ring.path.waypoints.clone();
        if order.is_empty() {
            return Leg::Arrived;
        }
        let here = self.flight.pose().position();
        if ring.closed {
            order.push(order[0]);
        } else if here.distance(order[0]) > here.distance(*order.last().unwrap()) {
            order.reverse();
        }
        match self.goto(order[0], Facing::House, true) {
            Leg::Arrived => {}
            other => return other,
        }
        self.follow(order, Facing::House, true, true)
    }

    /// Fly to the approach point for `det` and land there.
    pub fn approach_and_land(&mut self, det: &DoorDetection) -> (Leg, Vec2, bool) {
        self.sense();
        let (point, flagged) = resolve_approach_point(det, self.cfg.approach_offset, &self.base, &self.ok);
        match self.goto(point, Facing::Motion, false) {
            Leg::Arrived => {}
            other => return (other, point, flagged),
        }
        while !self.flight.step_toward(point, 0.0, None) {
            if self.flight.time() >= self.cfg.time_cap {
                return (Leg::Timeout, point, flagged);
            }
        }
        (Leg::Arrived, point, flagged)
    }
}

/// Door search and delivery after the descent: detector check and yaw sweep,
/// then the footprint search, then approach and landing.
pub fn deliver_to_front_door(
    flight: &mut Flight,
    world: &WorldModel,
    occ: &OccupancyGrid,
    ring: Option<&FootprintRing>,
    roof_points: Vec<Vec2>,
    detector: &mut DoorDetector,
    cfg: &MissionConfig,
) -> DeliveryOutcome {
    let cap = cfg.time_cap;
    let mut detections = Vec::new();
    let swept = yaw_sweep_search(flight, world, detector, cfg);
    let queries_before_ring = detector.queries();
    if swept.is_none() && flight.time() >= cap {
        let mut out = DeliveryOutcome::new(DeliveryStatus::Timeout, flight, cap);
        out.queries_before_ring = queries_before_ring;
        return out;
    }
    let mut nav = Navigator::new(flight, world, cfg, detector, occ.clone(), roof_points);
    let det = match swept {
        Some(d) => Some(d),
        None => match ring {
            None => None,
            Some(r) => match nav.search_ring(r) {
                Leg::Detected(d) => Some(d),
                Leg::Arrived => None,
                Leg::Timeout => return finish(nav, DeliveryStatus::Timeout, queries_before_ring, None),
                Leg::Stuck => return finish(nav, DeliveryStatus::Stuck, queries_before_ring, None),
            },
        },
    };
    let Some(det) = det else {
        return finish(nav, DeliveryStatus::DoorNotFound, queries_before_ring, None);
    };
    detections.push(det);
    let (leg, point, flagged) = nav.approach_and_land(&det);
    let status = match leg {
        Leg::Arrived => DeliveryStatus::Delivered,
        Leg::Timeout => DeliveryStatus::Timeout,
        _ => DeliveryStatus::Stuck,
    };
    let mut out = finish(nav, status, queries_before_ring, Some((point, flagged)));
    if out.detections.is_empty() {
        out.detections = detections;
    }
    out
}

fn finish(nav: Navigator, status: DeliveryStatus, queries_before_ring: usize, approach: Option<(Vec2, bool)>) -> DeliveryOutcome {
    let cap = nav.cfg.time_cap;
    let detections = nav.detections.clone();
    let mut out = DeliveryOutcome::new(status, nav.flight, cap);
    out.detections = detections;
    out.queries_before_ring = queries_before_ring;
    if let Some((p, f)) = approach {
        out.approach_point = Some(p);
        out.approach_fallback = f;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFrame;
    use crate::simworld::DronePose;

    fn det(p: Vec2, n: Vec2) -> DoorDetection {
        DoorDetection {
            door_point: p,
            wall_normal: n,
            source_pose: DronePose::new(0.0, 0.0, 2.0, 0.0),
        }
    }

    #[test]
    fn approach_point_offsets() {
        let d = det(Vec2::new(10.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(door_approach_point(&d, 1.0), Vec2::new(10.0, 1.0));
        assert_eq!(door_approach_point(&d, 0.0), Vec2::new(10.0, 0.0));
    }

    #[test]
    fn blocked_approach_point_falls_back_along_normal() {
        let frame = GridFrame::new(40, 40, 0.25, Vec2::ZERO);
        let mut occ = OccupancyGrid::free(frame);
        // hedge row covering y in [5.75, 6.25] around the nominal point
        for c in 0..40 {
            for r in 23..=25 {
                occ.set((c, r), true);
            }
        }
        let ok = occ.traversable(0.0);
        let d = det(Vec2::new(5.0, 5.0), Vec2::new(0.0, 1.0));
        let (p, flagged) = resolve_approach_point(&d, 1.0, &occ, &ok);
        assert!(flagged);
        // both sides are free 0.5 m away; the door side wins
        assert_eq!(p, Vec2::new(5.0, 5.5));
    }

    #[test]
    fn advance_carries_over_waypoints() {
        let wps = [Vec2::new(0.1, 0.0), Vec2::new(0.2, 0.0), Vec2::new(0.2, 1.0)];
        let (p, i) = advance_along(Vec2::ZERO, &wps, 0, 0.3);
        assert_eq!(i, 2);
        assert!((p.x - 0.2).abs() < 1e-12 && (p.y - 0.1).abs() < 1e-12);
    }

    #[test]
    fn replan_identity_and_detour() {
        let frame = GridFrame::new(30, 30, 0.25, Vec2::ZERO);
        let occ = OccupancyGrid::free(frame);
        let path = crate::occupancy::plan_path(&occ, frame.to_world((2, 15)), frame.to_world((27, 15)), 0.5).unwrap();
        assert_eq!(dynamic_replan(&path, &[], &occ, 0.5).unwrap(), path);
        // far-away sensed cell leaves it unchanged too
        assert_eq!(dynamic_replan(&path, &[(15, 1)], &occ, 0.5).unwrap(), path);
        let car: Vec<Cell> = (12..18).flat_map(|c| (13..18).map(move |r| (c, r))).collect();
        let new = dynamic_replan(&path, &car, &occ, 0.5).unwrap();
        assert!(new.total_length >= path.total_length);
        assert_eq!(new.goal(), path.goal());
        for w in &new.waypoints {
            for &c in &car {
                assert!(w.distance(frame.to_world(c)) >= 0.5);
            }
        }
        let wall: Vec<Cell> = (0..30).map(|r| (20, r)).collect();
        assert_eq!(dynamic_replan(&path, &wall, &occ, 0.5), Err(OccupancyError::Unreachable));
    }
}
