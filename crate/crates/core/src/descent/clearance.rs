//! Clearance map and the outward ring search for a safe descent pixel.

use super::camera::CameraModel;
use super::regions::{pixel_in_region, DescentRegion};
use super::DescentError;
use crate::edt::distance_transform;
use crate::semantics::{FrontBackMask, Pixel, SemanticGrid};

/// Slack on the clearance comparison so that pixels sitting exactly on the
/// threshold are not decided by rounding noise.
pub const CLEARANCE_EPS: f64 = 1e-9;

/// Metric distance from every pixel to the nearest roof or obstacle pixel,
/// using the ground scale at height `h`.
pub fn clearance_map(grid: &SemanticGrid, cam: &CameraModel, h: f64) -> Result<Vec<f64>, DescentError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DescentError::NonPositiveHeight(h));
    }
    let (sx, sy) = cam.ground_scale(h);
    let blocking: Vec<bool> = grid.labels().iter().map(|l| l.is_blocking()).collect();
    Ok(distance_transform(&blocking, grid.width(), grid.height(), sx, sy))
}

/// Nearest region pixel (ground-plane metres from the image centre) whose
/// clearance to every roof and obstacle pixel is at least `clearance`.
///
/// Candidates are visited in expanding square rings around the drone pixel.
/// Because rings are square and the metric may be anisotropic, the search keeps
/// going until no later ring can beat the best candidate found; ties resolve to
/// the earlier pixel in raster order.
pub fn find_safe_descent_point(
    grid: &SemanticGrid,
    mask: &FrontBackMask,
    region: DescentRegion,
    cam: &CameraModel,
    h_drone: f64,
    clearance: f64,
) -> Result<Pixel, DescentError> {
    let clear = clearance_map(grid, cam, h_drone)?;
    let (sx, sy) = cam.ground_scale(h_drone);
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let drone = grid.drone_pixel();
    let center = grid.center_pixel();
    let (cx, cy) = (center.x as i64, center.y as i64);
    // How far the true drone position sits from the centre pixel, in pixels.
    let slack = (drone.x - cx as f64).abs().max((drone.y - cy as f64).abs());
    let step = sx.min(sy);

    let valid = |p: Pixel| {
        pixel_in_region(grid, mask, p, region)
            && clear[p.y * grid.width() + p.x] >= clearance - CLEARANCE_EPS
    };
    let dist = |p: Pixel| {
        let dx = (p.x as f64 - drone.x) * sx;
        let dy = (p.y as f64 - drone.y) * sy;
        (dx * dx + dy * dy).sqrt()
    };

    let max_ring = (cx.max(w - 1 - cx)).max(cy.max(h - 1 - cy));
    let mut best: Option<(f64, Pixel)> = None;
    for k in 0..=max_ring {
        if let Some((bd, _)) = best {
            let lower = ((k as f64) - slack).max(0.0) * step;
            if lower > bd {
                break;
            }
        }
        for p in ring(cx, cy, k, w, h) {
            if !valid(p) {
                continue;
            }
            let d = dist(p);
            let better = match best {
                None => true,
                Some((bd, bp)) => d < bd || (d == bd && (p.y, p.x) < (bp.y, bp.x)),
            };
            if better {
                best = Some((d, p));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(DescentError::NoSafeSpot)
}

/// Pixels at Chebyshev distance exactly `k` from `(cx, cy)`, clipped to the image.
fn ring(cx: i64, cy: i64, k: i64, w: i64, h: i64) -> impl Iterator<Item = Pixel> {
    let (x0, x1, y0, y1) = (cx - k, cx + k, cy - k, cy + k);
    (y0..=y1)
        .flat_map(move |y| {
            let edge_row = y == y0 || y == y1;
            let xs: Box<dyn Iterator<Item = i64>> = if edge_row || k == 0 {
                Box::new(x0..=x1)
            } else {
                Box::new([x0, x1].into_iter())
            };
            xs.map(move |x| (x, y))
        })
        .filter(move |&(x, y)| x >= 0 && y >= 0 && x < w && y < h)
        .map(|(x, y)| Pixel::new(x as usize, y as usize))
}
