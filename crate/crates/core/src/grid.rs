//! Metric registration of rasters on the world plane.

use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

/// Cell index `(column, row)`.
pub type Cell = (usize, usize);

/// Maps cell `(c, r)` to the world point `origin + (c, r) * resolution`.
///
/// Cell coordinates name the cell's sample point, the same convention the
/// semantic rasters use for pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Vec2,
}

impl GridFrame {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Vec2) -> Self {
        Self {
            width,
            height,
            resolution,
            origin,
        }
    }

    /// Frame covering `[min, max]` with the given resolution.
    pub fn covering(min: Vec2, max: Vec2, resolution: f64) -> Self {
        let width = ((max.x - min.x) / resolution).ceil() as usize + 1;
        let height = ((max.y - min.y) / resolution).ceil() as usize + 1;
        Self::new(width, height, resolution, min)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        (i % self.width, i / self.width)
    }

    pub fn to_world(&self, cell: Cell) -> Vec2 {
        self.origin + Vec2::new(cell.0 as f64, cell.1 as f64) * self.resolution
    }

    /// Nearest cell to a world point, `None` when it falls outside the frame.
    pub fn to_cell(&self, p: Vec2) -> Option<Cell> {
        let c = ((p.x - self.origin.x) / self.resolution).round();
        let r = ((p.y - self.origin.y) / self.resolution).round();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((c as usize, r as usize))
    }

    /// Nearest cell, clamped into the frame.
    pub fn to_cell_clamped(&self, p: Vec2) -> Cell {
        let c = ((p.x - self.origin.x) / self.resolution).round();
        let r = ((p.y - self.origin.y) / self.resolution).round();
        (
            c.clamp(0.0, (self.width - 1) as f64) as usize,
            r.clamp(0.0, (self.height - 1) as f64) as usize,
        )
    }

    pub fn contains(&self, cell: (i64, i64)) -> bool {
        cell.0 >= 0 && cell.1 >= 0 && (cell.0 as usize) < self.width && (cell.1 as usize) < self.height
    }

    /// The 8-neighbourhood of a cell, clipped to the frame.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (c, r) = (cell.0 as i64, cell.1 as i64);
        NEIGHBORS8
            .iter()
            .map(move |&(dc, dr)| (c + dc, r + dr))
            .filter(move |&n| self.contains(n))
            .map(|(c, r)| (c as usize, r as usize))
    }

    /// Cells whose sample point lies within `radius` of `center`.
    pub fn cells_within(&self, center: Vec2, radius: f64) -> Vec<Cell> {
        let res = self.resolution;
        let lo_c = (((center.x - radius - self.origin.x) / res).floor()).max(0.0) as usize;
        let lo_r = (((center.y - radius - self.origin.y) / res).floor()).max(0.0) as usize;
        let hi_c = ((center.x + radius - self.origin.x) / res).ceil();
        let hi_r = ((center.y + radius - self.origin.y) / res).ceil();
        if hi_c < 0.0 || hi_r < 0.0 {
            return Vec::new();
        }
        let hi_c = (hi_c as usize).min(self.width.saturating_sub(1));
        let hi_r = (hi_r as usize).min(self.height.saturating_sub(1));
        let mut out = Vec::new();
        for r in lo_r..=hi_r {
            for c in lo_c..=hi_c {
                if self.to_world((c, r)).distance(center) <= radius {
                    out.push((c, r));
                }
            }
        }
        out
    }
}

pub const NEIGHBORS8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Integer line walk from `a` to `b` (inclusive of both ends).
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}
