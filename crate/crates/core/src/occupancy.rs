//! Aerial occupancy map, footprint ring extraction and grid path planning.

use crate::descent::CameraModel;
use crate::edt::distance_transform;
use crate::geometry::Vec2;
use crate::grid::{Cell, GridFrame, NEIGHBORS8};
use crate::semantics::{ClassLabel, Segment, SemanticGrid};
use crate::simworld::DronePose;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OccupancyError {
    #[error("capture height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("camera pixels must be square")]
    NonSquarePixels,
    #[error("point lies outside the grid")]
    OutOfBounds,
    #[error("start cell is occupied or inside the inflation margin")]
    StartOccupied,
    #[error("goal cell is occupied or inside the inflation margin")]
    GoalOccupied,
    #[error("goal is unreachable")]
    Unreachable,
    #[error("no free band around the roof at the requested standoff")]
    NoRingExists,
    #[error("occupancy raster parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Binary traversability raster registered to the world plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub frame: GridFrame,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(frame: GridFrame, occupied: Vec<bool>) -> Self {
        assert_eq!(frame.len(), occupied.len(), "raster size mismatch");
        Self { frame, occupied }
    }

    pub fn free(frame: GridFrame) -> Self {
        Self::new(frame, vec![false; frame.len()])
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.frame.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) {
        let i = self.frame.index(cell);
        self.occupied[i] = occupied;
    }

    /// Copy of the grid with extra occupied cells.
    pub fn with_overlay<'a>(&self, cells: impl IntoIterator<Item = &'a Cell>) -> OccupancyGrid {
        let mut g = self.clone();
        for &c in cells {
            if c.0 < g.width() && c.1 < g.height() {
                g.set(c, true);
            }
        }
        g
    }

    /// Metric distance from every cell to the nearest occupied cell.
    pub fn clearance(&self) -> Vec<f64> {
        let r = self.resolution();
        distance_transform(&self.occupied, self.width(), self.height(), r, r)
    }

    /// Cells a drone may occupy: free and at least `inflation` from any occupied cell.
    pub fn traversable(&self, inflation: f64) -> Vec<bool> {
        if inflation <= 0.0 {
            return self.occupied.iter().map(|&o| !o).collect();
        }
        self.clearance().into_iter().map(|d| d >= inflation).collect()
    }

    /// `W H resolution ox oy` header, then rows of `#` (occupied) and `.` (free).
    pub fn to_ascii(&self) -> String {
        let f = &self.frame;
        let mut s = format!("{} {} {} {} {}\n", f.width, f.height, f.resolution, f.origin.x, f.origin.y);
        for row in self.occupied.chunks(f.width) {
            s.extend(row.iter().map(|&o| if o { '#' } else { '.' }));
            s.push('\n');
        }
        s
    }

    pub fn from_ascii(text: &str) -> Result<Self, OccupancyError> {
        let err = |line: usize, m: &str| OccupancyError::Parse {
            line,
            message: m.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(1, "expected `W H resolution ox oy`"));
        }
        let w: usize = f[0].parse().map_err(|_| err(1, "bad width"))?;
        let h: usize = f[1].parse().map_err(|_| err(1, "bad height"))?;
        let nums: Result<Vec<f64>, _> = f[2..].iter().map(|s| s.parse::<f64>()).collect();
        let nums = nums.map_err(|_| err(1, "bad number"))?;
        if w == 0 || h == 0 || !(nums[0] > 0.0) || !nums[1].is_finite() || !nums[2].is_finite() {
            return Err(err(1, "degenerate grid"));
        }
        let mut occupied = Vec::with_capacity(w * h);
        for r in 0..h {
            let line = lines.next().ok_or_else(|| err(r + 2, "missing row"))?;
            if line.chars().count() != w {
                return Err(err(r + 2, "row length differs from width"));
            }
            for c in line.chars() {
                occupied.push(match c {
                    '#' => true,
                    '.' => false,
                    _ => return Err(err(r + 2, "unknown cell code")),
                });
            }
        }
        Ok(Self::new(GridFrame::new(w, h, nums[0], Vec2::new(nums[1], nums[2])), occupied))
    }
}

impl fmt::Display for OccupancyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

/// Grid frame in which pixel `(u, v)` of a capture at `pose` sits on its
/// ground point.
pub fn capture_frame(cam: &CameraModel, pose: &DronePose) -> Result<GridFrame, OccupancyError> {
    let h = pose.altitude;
    if !(h > 0.0 && h.is_finite()) {
        return Err(OccupancyError::NonPositiveHeight(h));
    }
    if cam.fx != cam.fy {
        return Err(OccupancyError::NonSquarePixels);
    }
    let res = h / cam.fx;
    let origin = pose.position() - Vec2::new(cam.ox, cam.oy) * res;
    Ok(GridFrame::new(cam.width, cam.height, res, origin))
}

/// Roofs and obstacles (and anything unlabelled) are occupied; paved area and
/// grass are free. One cell per pixel, `h / fx` metres wide.
pub fn build_occupancy(
    grid: &SemanticGrid,
    cam: &CameraModel,
    pose: &DronePose,
) -> Result<OccupancyGrid, OccupancyError> {
    let mut frame = capture_frame(cam, pose)?;
    frame.width = grid.width();
    frame.height = grid.height();
    let occupied = grid
        .labels()
        .iter()
        .map(|l| !matches!(l, ClassLabel::PavedArea | ClassLabel::Grass))
        .collect();
    Ok(OccupancyGrid::new(frame, occupied))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec2>,
    pub total_length: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Vec2>) -> Self {
        let total_length = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        Self {
            waypoints,
            total_length,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn goal(&self) -> Option<Vec2> {
        self.waypoints.last().copied()
    }
}

/// Integer step costs: one unit per straight move, `DIAGONAL_COST` per
/// diagonal move, in millionths of a cell. Keeping costs integral makes the
/// optimum independent of summation order.
pub const STRAIGHT_COST: u64 = 1_000_000;
pub const DIAGONAL_COST: u64 = 1_414_214;

fn octile(a: Cell, b: Cell) -> u64 {
    let dx = a.0.abs_diff(b.0) as u64;
    let dy = a.1.abs_diff(b.1) as u64;
    let (lo, hi) = (dx.min(dy), dx.max(dy));
    STRAIGHT_COST * (hi - lo) + DIAGONAL_COST * lo
}

/// Legal 8-connected moves from `cell`: diagonals may not cut a blocked corner.
pub fn grid_moves<'a>(
    frame: &'a GridFrame,
    ok: &'a [bool],
    cell: Cell,
) -> impl Iterator<Item = (Cell, u64)> + 'a {
    let (c, r) = (cell.0 as i64, cell.1 as i64);
    NEIGHBORS8.iter().filter_map(move |&(dc, dr)| {
        let n = (c + dc, r + dr);
        if !frame.contains(n) {
            return None;
        }
        let nc = (n.0 as usize, n.1 as usize);
        if !ok[frame.index(nc)] {
            return None;
        }
        if dc != 0 && dr != 0 {
            let a = frame.index(((c + dc) as usize, r as usize));
            let b = frame.index((c as usize, (r + dr) as usize));
            if !ok[a] || !ok[b] {
                return None;
            }
            Some((nc, DIAGONAL_COST))
        } else {
            Some((nc, STRAIGHT_COST))
        }
    })
}

/// A* over the cells marked `ok`; returns the cell sequence and its cost.
pub fn astar(frame: &GridFrame, ok: &[bool], start: Cell, goal: Cell) -> Option<(Vec<Cell>, u64)> {
    let n = frame.len();
    let mut g = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let (si, gi) = (frame.index(start), frame.index(goal));
    let mut open = BinaryHeap::new();
    g[si] = 0;
    open.push(Reverse((octile(start, goal), 0u64, si)));
    while let Some(Reverse((_, gc, i))) = open.pop() {
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == gi {
            let mut cells = vec![frame.cell_of_index(i)];
            let mut k = i;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push(frame.cell_of_index(k));
            }
            cells.reverse();
            return Some((cells, gc));
        }
        let cell = frame.cell_of_index(i);
        for (nb, step) in grid_moves(frame, ok, cell) {
            let j = frame.index(nb);
            let cand = gc + step;
            if cand < g[j] {
                g[j] = cand;
                parent[j] = i;
                open.push(Reverse((cand + octile(nb, goal), cand, j)));
            }
        }
    }
    None
}

/// Shortest 8-connected path from `start` to `goal` with obstacles grown by
/// `inflation` metres. Waypoints are the sample points of the visited cells.
pub fn plan_path(occ: &OccupancyGrid, start: Vec2, goal: Vec2, inflation: f64) -> Result<Path, OccupancyError> {
    let ok = occ.traversable(inflation);
    plan_on(occ, &ok, start, goal)
}

/// `plan_path` with a precomputed traversability mask.
pub fn plan_on(occ: &OccupancyGrid, ok: &[bool], start: Vec2, goal: Vec2) -> Result<Path, OccupancyError> {
    let f = &occ.frame;
    let s = f.to_cell(start).ok_or(OccupancyError::OutOfBounds)?;
    let t = f.to_cell(goal).ok_or(OccupancyError::OutOfBounds)?;
    if !ok[f.index(s)] {
        return Err(OccupancyError::StartOccupied);
    }
    if !ok[f.index(t)] {
        return Err(OccupancyError::GoalOccupied);
    }
    let (cells, _) = astar(f, ok, s, t).ok_or(OccupancyError::Unreachable)?;
    Ok(Path::new(cells.into_iter().map(|c| f.to_world(c)).collect()))
}

/// Ordered loop (or longest open arc) of cells around a roof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintRing {
    pub cells: Vec<Cell>,
    pub path: Path,
    /// True when the whole loop is traversable.
    pub closed: bool,
}

impl FootprintRing {
    /// Length of the loop including the closing segment when closed.
    pub fn loop_length(&self) -> f64 {
        let w = &self.path.waypoints;
        let closing = match (self.closed, w.first(), w.last()) {
            (true, Some(a), Some(b)) => a.distance(*b),
            _ => 0.0,
        };
        self.path.total_length + closing
    }

    /// The same ring walked the other way. A closed ring keeps its start cell.
    pub fn reversed(&self) -> FootprintRing {
        let mut cells = self.cells.clone();
        let mut wps = self.path.waypoints.clone();
        let keep = usize::from(self.closed && !cells.is_empty());
        cells[keep..].reverse();
        wps[keep..].reverse();
        FootprintRing {
            cells,
            path: Path::new(wps),
            closed: self.closed,
        }
    }
}

/// Cells just outside the set of cells closer than `standoff` to the roof,
/// ordered by walking that set's outer boundary, keeping only traversable
/// cells. When the band is interrupted the longest uninterrupted arc is
/// returned. A closed loop starts at the cell nearest `start_hint`.
pub fn extract_footprint_ring(
    occ: &OccupancyGrid,
    roof: &Segment,
    standoff: f64,
    inflation: f64,
    start_hint: Vec2,
) -> Result<FootprintRing, OccupancyError> {
    let f = &occ.frame;
    let (w, h) = (f.width, f.height);
    if roof.pixels.is_empty() || !(standoff > 0.0) {
        return Err(OccupancyError::NoRingExists);
    }
    let mut roof_mask = vec![false; f.len()];
    for p in &roof.pixels {
        if p.x < w && p.y < h {
            roof_mask[p.y * w + p.x] = true;
        }
    }
    let d_roof = distance_transform(&roof_mask, w, h, f.resolution, f.resolution);
    let inside: Vec<bool> = d_roof.iter().map(|&d| d < standoff).collect();
    let ok = occ.traversable(inflation);

    let band = trace_outer_band(&inside, w, h).ok_or(OccupancyError::NoRingExists)?;
    let valid: Vec<bool> = band.iter().map(|c| c.is_some_and(|c| ok[f.index(c)])).collect();
    let n = band.len();
    let cells: Vec<Cell>;
    let closed;
    if valid.iter().all(|&v| v) {
        closed = true;
        let start = (0..n)
            .min_by(|&a, &b| {
                let da = f.to_world(band[a].unwrap()).distance(start_hint);
                let db = f.to_world(band[b].unwrap()).distance(start_hint);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .unwrap_or(0);
        cells = (0..n).map(|k| band[(start + k) % n].unwrap()).collect();
    } else {
        closed = false;
        // longest cyclic run of valid entries, starting after an invalid one
        let first_bad = valid.iter().position(|&v| !v).unwrap();
        let (mut best_start, mut best_len) = (0, 0);
        let (mut run_start, mut run_len) = (0, 0);
        for k in 1..=n {
            let i = (first_bad + k) % n;
            if valid[i] {
                if run_len == 0 {
                    run_start = i;
                }
                run_len += 1;
                if run_len > best_len {
                    best_len = run_len;
                    best_start = run_start;
                }
            } else {
                run_len = 0;
            }
        }
        if best_len == 0 {
            return Err(OccupancyError::NoRingExists);
        }
        cells = (0..best_len).map(|k| band[(best_start + k) % n].unwrap()).collect();
    }
    let path = Path::new(cells.iter().map(|&c| f.to_world(c)).collect());
    Ok(FootprintRing { cells, path, closed })
}

/// Walk the outer crack boundary of `inside` clockwise (image frame) and emit,
/// for every boundary edge, the outside cell across it (`None` off-grid).
/// Consecutive repeats are merged.
fn trace_outer_band(inside: &[bool], w: usize, h: usize) -> Option<Vec<Option<Cell>>> {
    let first = inside.iter().position(|&b| b)?;
    let is_in = |c: i64, r: i64| c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h && inside[r as usize * w + c as usize];
    // directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y; vertex (vx, vy) is the
    // top-left corner of cell (vx, vy)
    let step = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)];
    // the boundary edge leaving vertex v in direction d, if any: inside cell on
    // the right of travel, outside cell on the left
    let cells_of = |vx: i64, vy: i64, d: usize| -> ((i64, i64), (i64, i64)) {
        match d {
            0 => ((vx, vy), (vx, vy - 1)),
            1 => ((vx - 1, vy), (vx, vy)),
            2 => ((vx - 1, vy - 1), (vx - 1, vy)),
            _ => ((vx, vy - 1), (vx - 1, vy - 1)),
        }
    };
    let is_edge = |vx: i64, vy: i64, d: usize| {
        let (a, b) = cells_of(vx, vy, d);
        is_in(a.0, a.1) && !is_in(b.0, b.1)
    };
    let (c0, r0) = ((first % w) as i64, (first / w) as i64);
    let start = (c0, r0, 0usize);
    let (mut vx, mut vy, mut d) = start;
    let mut out: Vec<Option<Cell>> = Vec::new();
    let limit = 4 * (w + 1) * (h + 1) + 4;
    for _ in 0..limit {
        let (_, o) = cells_of(vx, vy, d);
        let oc = (o.0 >= 0 && o.1 >= 0 && (o.0 as usize) < w && (o.1 as usize) < h).then(|| (o.0 as usize, o.1 as usize));
        if out.last() != Some(&oc) {
            out.push(oc);
        }
        vx += step[d].0;
        vy += step[d].1;
        // prefer turning right, then straight, then left
        let next = [(d + 1) % 4, d, (d + 3) % 4].into_iter().find(|&nd| is_edge(vx, vy, nd))?;
        d = next;
        if (vx, vy, d) == start {
            break;
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    Some(out)
}
