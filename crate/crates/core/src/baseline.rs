//! Frontier-exploration comparator: descend at a random open spot in front of
//! the house, then explore a locally built map until the door is seen.

use crate::descent::DeliveryTarget;
use crate::geometry::Vec2;
use crate::grid::{Cell, GridFrame, NEIGHBORS8};
use crate::navigation::{
    advance_along, DeliveryOutcome, DeliveryStatus, Leg, MissionConfig, Navigator,
};
use crate::occupancy::{astar, grid_moves, OccupancyGrid};
use crate::simworld::{DoorDetection, DoorDetector, Flight, ObstacleRaster, WorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Ternary map built from obstacle scans. Cells only leave `Unknown` by being
/// observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationMap {
    pub frame: GridFrame,
    cells: Vec<CellState>,
}

impl ExplorationMap {
    pub fn unknown(frame: GridFrame) -> Self {
        Self {
            frame,
            cells: vec![CellState::Unknown; frame.len()],
        }
    }

    pub fn from_cells(frame: GridFrame, cells: Vec<CellState>) -> Self {
        assert_eq!(cells.len(), frame.len(), "cell count must match the frame");
        Self { frame, cells }
    }

    pub fn get(&self, cell: Cell) -> CellState {
        self.cells[self.frame.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, state: CellState) {
        let i = self.frame.index(cell);
        self.cells[i] = state;
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn unknown_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s == CellState::Unknown).count()
    }

    /// Whether `cell` is Free with at least one Unknown 8-neighbour.
    pub fn is_frontier(&self, cell: Cell) -> bool {
        self.get(cell) == CellState::Free
            && self
                .frame
                .neighbors8(cell)
                .any(|n| self.get(n) == CellState::Unknown)
    }

    /// Occupancy for planning: Occupied cells, plus Unknown ones unless
    /// `optimistic`.
    pub fn to_occupancy(&self, optimistic: bool) -> OccupancyGrid {
        let occupied = self
            .cells
            .iter()
            .map(|&s| match s {
                CellState::Occupied => true,
                CellState::Unknown => !optimistic,
                CellState::Free => false,
            })
            .collect();
        OccupancyGrid::new(self.frame, occupied)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCluster {
    /// Cells in raster order.
    pub cells: Vec<Cell>,
    pub centroid: Vec2,
}

/// Frontier cells grouped into 8-connected clusters, nearest centroid to
/// `drone` first.
pub fn detect_frontiers(map: &ExplorationMap, drone: Vec2) -> Vec<FrontierCluster> {
    let f = &map.frame;
    let is_f: Vec<bool> = (0..f.len()).map(|i| map.is_frontier(f.cell_of_index(i))).collect();
    let mut seen = vec![false; f.len()];
    let mut clusters = Vec::new();
    for i in 0..f.len() {
        if !is_f[i] || seen[i] {
            continue;
        }
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        let mut cells = Vec::new();
        while let Some(k) = queue.pop_front() {
            let c = f.cell_of_index(k);
            cells.push(c);
            for n in f.neighbors8(c) {
                let j = f.index(n);
                if is_f[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        cells.sort_by_key(|&(c, r)| (r, c));
        let mut sum = Vec2::ZERO;
        for &c in &cells {
            sum = sum + f.to_world(c);
        }
        let centroid = sum * (1.0 / cells.len() as f64);
        clusters.push(FrontierCluster { cells, centroid });
    }
    clusters.sort_by(|a, b| {
        a.centroid
            .distance(drone)
            .total_cmp(&b.centroid.distance(drone))
            .then_with(|| (a.cells[0].1, a.cells[0].0).cmp(&(b.cells[0].1, b.cells[0].0)))
    });
    clusters
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    /// Frontier targets must lie within this distance of the descent point.
    pub radius_cap: f64,
    pub time_cap: f64,
    pub min_cluster_size: usize,
    pub map_resolution: f64,
    /// Clearance of the random descent spot from any obstacle.
    pub descent_clearance: f64,
    pub hover_height: f64,
    /// Targets within this distance of a visited or failed one are skipped.
    pub blacklist_radius: f64,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            radius_cap: 25.0,
            time_cap: 180.0,
            min_cluster_size: 4,
            map_resolution: 0.25,
            descent_clearance: 2.5,
            hover_height: 2.0,
            blacklist_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierOutcome {
    pub delivery: DeliveryOutcome,
    pub descent_point: Option<Vec2>,
    /// Frontier cells chosen as exploration goals, in order.
    pub targets: Vec<Vec2>,
    /// Unknown cell count after every map update.
    pub unknown_counts: Vec<usize>,
}

/// Uniformly drawn open spot in the recipient lot's front paved area or
/// front yard.
pub fn random_front_spot(world: &WorldModel, clearance: f64, resolution: f64, rng: &mut impl Rng) -> Option<Vec2> {
    let frame = GridFrame::covering(world.bounds.min, world.bounds.max, resolution);
    let spots: Vec<Vec2> = (0..frame.len())
        .map(|i| frame.to_world(frame.cell_of_index(i)))
        .filter(|&p| {
            world.lot.contains(p)
                && (world.in_target_region(p, DeliveryTarget::FrontPavedArea)
                || world.in_target_region(p, DeliveryTarget::FrontYard))
                && world.obstacle_clearance(p) >= clearance
        })
        .collect();
    if spots.is_empty() {
        return None;
    }
    Some(spots[rng.random_range(0..spots.len())])
}

struct Explorer<'a> {
    map: ExplorationMap,
    raster: ObstacleRaster,
    cfg: &'a FrontierConfig,
    mission: &'a MissionConfig,
    origin: Vec2,
    blacklist: Vec<Vec2>,
}

impl Explorer<'_> {
    fn update(&mut self, flight: &Flight) {
        let scan = self.raster.scan(&flight.pose(), self.mission.scan_radius);
        for c in scan.free {
            self.map.set(c, CellState::Free);
        }
        for c in scan.occupied {
            self.map.set(c, CellState::Occupied);
        }
    }

    fn banned(&self, p: Vec2) -> bool {
        self.blacklist.iter().any(|b| b.distance(p) < self.cfg.blacklist_radius)
    }

    /// Nearest admissible frontier and a path to it over known free space.
    fn pick(&mut self, here: Vec2) -> Option<(Vec2, Vec<Vec2>)> {
        let f = self.map.frame;
        // known free cells, kept `inflation` away from observed obstacles
        let mut ok_start: Vec<bool> = self
            .map
            .to_occupancy(true)
            .traversable(self.mission.inflation)
            .into_iter()
            .zip(&self.map.cells)
            .map(|(t, &s)| t && s == CellState::Free)
            .collect();
        let start = f.to_cell(here)?;
        ok_start[f.index(start)] = true;
        let reach = reachable(&f, &ok_start, start);
        for cluster in detect_frontiers(&self.map, here) {
            if cluster.cells.len() < self.cfg.min_cluster_size {
                continue;
            }
            // the cluster cell nearest its centroid that is admissible
            let mut cands: Vec<Cell> = cluster
                .cells
                .iter()
                .copied()
                .filter(|&c| {
                    let p = f.to_world(c);
                    reach[f.index(c)] && p.distance(self.origin) <= self.cfg.radius_cap && !self.banned(p)
                })
                .collect();
            cands.sort_by(|&a, &b| {
                f.to_world(a)
                    .distance(cluster.centroid)
                    .total_cmp(&f.to_world(b).distance(cluster.centroid))
                    .then_with(|| (a.1, a.0).cmp(&(b.1, b.0)))
            });
            let Some(&goal) = cands.first() else {
                continue;
            };
            let gp = f.to_world(goal);
            if gp.distance(here) < self.cfg.blacklist_radius {
                self.blacklist.push(gp);
                continue;
            }
            if let Some((cells, _)) = astar(&f, &ok_start, start, goal) {
                return Some((gp, cells.into_iter().map(|c| f.to_world(c)).collect()));
            }
            self.blacklist.push(gp);
        }
        None
    }
}

struct Route {
    goal: Vec2,
    wps: Vec<Vec2>,
    idx: usize,
}

fn reachable(f: &GridFrame, ok: &[bool], start: Cell) -> Vec<bool> {
    let mut seen = vec![false; f.len()];
    seen[f.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for (n, _) in grid_moves(f, ok, c) {
            let j = f.index(n);
            if !seen[j] {
                seen[j] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Run the frontier baseline from the flight's current pose (top of house).
///
/// Elapsed time starts with the flight clock; a timeout reports exactly
/// `cfg.time_cap`.
pub fn frontier_explore_to_door(
    flight: &mut Flight,
    world: &WorldModel,
    cfg: &FrontierConfig,
    mission: &MissionConfig,
    detector: &mut DoorDetector,
    seed: u64,
) -> FrontierOutcome {
    let mission = MissionConfig {
        time_cap: cfg.time_cap,
        ..mission.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = FrontierOutcome {
        delivery: DeliveryOutcome::new(DeliveryStatus::DoorNotFound, flight, cfg.time_cap),
        descent_point: None,
        targets: Vec::new(),
        unknown_counts: Vec::new(),
    };
    let done = |flight: &Flight, out: &mut FrontierOutcome, status: DeliveryStatus| {
        let dets = std::mem::take(&mut out.delivery.detections);
        out.delivery = DeliveryOutcome::new(status, flight, cfg.time_cap);
        out.delivery.detections = dets;
    };
    let Some(spot) = random_front_spot(world, cfg.descent_clearance, cfg.map_resolution, &mut rng) else {
        done(flight, &mut out, DeliveryStatus::Stuck);
        return out;
    };
    out.descent_point = Some(spot);
    let alt = flight.pose().altitude;
    for (p, h) in [(spot, alt), (spot, cfg.hover_height)] {
        while !flight.step_toward(p, h, None) {
            if flight.time() >= cfg.time_cap {
                done(flight, &mut out, DeliveryStatus::Timeout);
                return out;
            }
        }
    }

    let frame = GridFrame::covering(world.bounds.min, world.bounds.max, cfg.map_resolution);
    let mut ex = Explorer {
        map: ExplorationMap::unknown(frame),
        raster: ObstacleRaster::new(world, frame),
        cfg,
        mission: &mission,
        origin: spot,
        blacklist: Vec::new(),
    };
    let per_tick = ((mission.perception_interval / flight.dt).round() as u64).max(1);
    let step = flight.max_speed * flight.dt;
    let mut route: Option<Route> = None;
    let t0 = flight.ticks();
    let found: DoorDetection = loop {
        if flight.time() >= cfg.time_cap {
            done(flight, &mut out, DeliveryStatus::Timeout);
            return out;
        }
        let tick = (flight.ticks() - t0) % per_tick == 0;
        if tick {
            ex.update(flight);
            out.unknown_counts.push(ex.map.unknown_count());
        }
        if let Some(d) = detector.query(world, &flight.pose()) {
            out.delivery.detections.push(d);
            break d;
        }
        let here = flight.pose().position();
        let repick = match &route {
            None => true,
            Some(r) if r.idx >= r.wps.len() => {
                ex.blacklist.push(r.goal);
                true
            }
            Some(r) => {
                tick && (!ex.map.is_frontier(frame.to_cell_clamped(r.goal))
                    || r.wps[r.idx..]
                        .iter()
                        .any(|&w| frame.to_cell(w).is_none_or(|c| ex.map.get(c) == CellState::Occupied)))
            }
        };
        if repick {
            route = ex.pick(here).map(|(goal, wps)| {
                out.targets.push(goal);
                Route { goal, wps, idx: 0 }
            });
            if route.is_none() {
                done(flight, &mut out, DeliveryStatus::DoorNotFound);
                return out;
            }
        }
        let r = route.as_mut().expect("route was just picked");
        let (pt, next) = advance_along(here, &r.wps, r.idx, step);
        let yaw = (pt - here).normalized().map(|d| d.angle());
        flight.step_toward(pt, cfg.hover_height, yaw);
        r.idx = next;
    };

    // approach over the explored map, treating unexplored space as free
    let occ = ex.map.to_occupancy(true);
    let mut nav = Navigator::new(flight, world, &mission, detector, occ, Vec::new());
    let (leg, point, flagged) = nav.approach_and_land(&found);
    let status = match leg {
        Leg::Arrived => DeliveryStatus::Delivered,
        Leg::Timeout => DeliveryStatus::Timeout,
        _ => DeliveryStatus::Stuck,
    };
    drop(nav);
    done(flight, &mut out, status);
    out.delivery.approach_point = Some(point);
    out.delivery.approach_fallback = flagged;
    out
}

/// Brute-force frontier cells by definition, for cross-checking.
pub fn frontier_cells_brute_force(map: &ExplorationMap) -> BTreeSet<Cell> {
    let f = &map.frame;
    let mut out = BTreeSet::new();
    for r in 0..f.height {
        for c in 0..f.width {
            if map.get((c, r)) != CellState::Free {
                continue;
            }
            let has_unknown = NEIGHBORS8.iter().any(|&(dc, dr)| {
                let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                nc >= 0
                    && nr >= 0
                    && (nc as usize) < f.width
                    && (nr as usize) < f.height
                    && map.get((nc as usize, nr as usize)) == CellState::Unknown
            });
            if has_unknown {
                out.insert((c, r));
            }
        }
    }
    out
}
