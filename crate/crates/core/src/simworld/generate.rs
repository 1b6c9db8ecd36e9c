//! Seeded procedural houses.
//!
//! A world is laid out in a canonical frame with the street along `+y`, then
//! turned by a random multiple of 90 degrees about the world centre.

use super::{Door, DoorMode, House, Region, WorldError, WorldModel};
use crate::geometry::{Polygon, Rect, Vec2};
use crate::semantics::ClassLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_ATTEMPTS: usize = 32;
const FENCE: f64 = 0.2;
const NOTCH_HALF_WIDTH: f64 = 1.3;
const DOOR_WIDTH: f64 = 1.0;
/// Fraction of front-yard sample points that must see an open door.
const OPEN_DOOR_VISIBILITY: f64 = 0.92;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub seed: u64,
    pub house_width: (f64, f64),
    pub house_depth: (f64, f64),
    /// Scales how many trees, hedges and cars are placed, in `[0, 1]`.
    pub obstacle_density: f64,
    pub door_mode: DoorMode,
    pub neighbor_count: usize,
    pub gps_offset_sigma: f64,
    pub capture_altitude: (f64, f64),
    /// Every delivery region must offer a point this far (plus margin) from obstacles.
    pub clearance: f64,
    pub world_size: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            seed: 0,
            house_width: (9.0, 14.0),
            house_depth: (8.0, 12.0),
            obstacle_density: 0.5,
            door_mode: DoorMode::Open,
            neighbor_count: 2,
            gps_offset_sigma: 1.0,
            capture_altitude: (20.0, 30.0),
            clearance: 2.5,
            world_size: 60.0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidParams(m.to_string()));
        let range_ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a > 0.0 && a <= b;
        if !range_ok(self.house_width) || !range_ok(self.house_depth) {
            return bad("house size ranges must be positive and ordered");
        }
        if self.house_width.1 > 16.0 || self.house_depth.1 > 14.0 {
            return bad("houses larger than 16 x 14 m do not fit a lot");
        }
        if !(0.0..=1.0).contains(&self.obstacle_density) {
            return bad("obstacle density must lie in [0, 1]");
        }
        if self.neighbor_count > 2 {
            return bad("at most two neighbouring houses");
        }
        if !(self.gps_offset_sigma >= 0.0 && self.gps_offset_sigma.is_finite()) {
            return bad("gps offset sigma must be non-negative");
        }
        if !range_ok(self.capture_altitude) {
            return bad("capture altitude range must be positive and ordered");
        }
        if !(self.clearance >= 0.0) {
            return bad("clearance must be non-negative");
        }
        if self.world_size != 60.0 {
            return bad("only the 60 m world layout is supported");
        }
        Ok(())
    }
}

/// Generate the world for `params.seed`, retrying the layout until it passes
/// the feasibility checks.
pub fn generate_world(params: &GeneratorParams) -> Result<WorldModel, WorldError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(w) = try_layout(params, &mut rng) {
            if feasible(&w, params) {
                return Ok(w);
            }
        }
    }
    Err(WorldError::RetriesExhausted {
        seed: params.seed,
        attempts: MAX_ATTEMPTS,
    })
}

/// Regions painted in order; a later rectangle replaces whatever it covers.
#[derive(Default)]
struct Canvas {
    regions: Vec<Region>,
}

impl Canvas {
    fn paint(&mut self, class: ClassLabel, rect: Rect) {
        let mut next = Vec::with_capacity(self.regions.len() + 4);
        for r in self.regions.drain(..) {
            next.extend(r.rect.subtract(&rect).into_iter().map(|p| Region { class: r.class, rect: p }));
        }
        next.push(Region { class, rect });
        self.regions = next;
    }

    fn is_clear(&self, rect: &Rect) -> bool {
        !self.regions.iter().any(|r| r.rect.overlaps(rect))
    }
}

fn uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a..b)
    }
}

struct Plot {
    house: House,
    lot: Rect,
    facade_y: f64,
}

fn try_layout(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> Option<WorldModel> {
    let size = p.world_size;
    let dens = p.obstacle_density;
    let mut canvas = Canvas::default();

    let w = uniform(rng, p.house_width);
    let d = uniform(rng, p.house_depth);
    let cy = 27.0 + rng.random_range(-1.5..1.5);
    let lot_cx = 30.0 + rng.random_range(-1.0..1.0);
    let offset = rng.random_range(-1.0..1.0);
    let cx = lot_cx + offset;
    let (x0, x1) = (cx - w / 2.0, cx + w / 2.0);
    let (yb, yf) = (cy - d / 2.0, cy + d / 2.0);
    let road_y0 = yf + rng.random_range(10.0..13.0);
    let road_y1 = (road_y0 + 7.0).min(size);
    let lot_w = rng.random_range(20.0..24.0_f64).max(w + 2.0 * (3.0 + offset.abs()));
    let (lot_x0, lot_x1) = (lot_cx - lot_w / 2.0, lot_cx + lot_w / 2.0);
    let back_y = yb - rng.random_range(9.0..13.0);
    if back_y < 0.5 || lot_x0 < 0.5 || lot_x1 > size - 0.5 {
        return None;
    }
    let lot = Rect::new(lot_x0, back_y, lot_x1, road_y0);

    canvas.paint(ClassLabel::PavedArea, Rect::new(0.0, road_y0, size, road_y1));

    // neighbours first so the recipient's own fences win on shared lines
    let mut neighbors = Vec::new();
    let sides: &[f64] = match p.neighbor_count {
        0 => &[],
        1 => {
            if rng.random_bool(0.5) {
                &[-1.0]
            } else {
                &[1.0]
            }
        }
        _ => &[-1.0, 1.0],
    };
    for &side in sides {
        let plot = neighbor_plot(p, rng, side, lot, yf, road_y0)?;
        paint_neighbor(&mut canvas, rng, &plot, road_y0);
        neighbors.push(plot.house);
    }

    // recipient lot fences and hedges
    canvas.paint(ClassLabel::Fence, Rect::new(lot_x0, back_y, lot_x1, back_y + FENCE));
    canvas.paint(ClassLabel::Fence, Rect::new(lot_x0, back_y, lot_x0 + FENCE, yf));
    canvas.paint(ClassLabel::Fence, Rect::new(lot_x1 - FENCE, back_y, lot_x1, yf));

    // driveway on one side of the facade, door on the other part
    let right = rng.random_bool(0.5);
    let dw = rng.random_range(3.0..5.5_f64).min(w - 6.5);
    if dw < 3.0 {
        return None;
    }
    let inset = rng.random_range(0.0..1.0);
    let (dx0, dx1) = if right {
        (x1 - inset - dw, x1 - inset)
    } else {
        (x0 + inset, x0 + inset + dw)
    };
    let (door_lo, door_hi) = if right {
        (x0 + 2.3, dx0 - 1.6)
    } else {
        (dx1 + 1.6, x1 - 2.3)
    };
    if door_lo >= door_hi {
        return None;
    }
    let door_x = rng.random_range(door_lo..door_hi);
    let driveway = Rect::new(dx0, yf, dx1, road_y0);
    canvas.paint(ClassLabel::PavedArea, driveway);

    // apron along the facade from the door to the driveway, and sometimes a
    // straight walk from the door to the road
    let ww = rng.random_range(1.2..1.6);
    let (a, b) = if right {
        (door_x - ww / 2.0, dx0)
    } else {
        (dx1, door_x + ww / 2.0)
    };
    canvas.paint(ClassLabel::PavedArea, Rect::new(a, yf, b, yf + ww));
    if rng.random_bool(0.6) {
        canvas.paint(ClassLabel::PavedArea, Rect::new(door_x - ww / 2.0, yf, door_x + ww / 2.0, road_y0));
    }

    // hedges along the open front edges of the lot
    for (hx0, hx1) in [(lot_x0, lot_x0 + 1.0), (lot_x1 - 1.0, lot_x1)] {
        if rng.random_bool(0.8 * dens) {
            let hedge = Rect::new(hx0, yf + 1.0, hx1, road_y0 - 1.0);
            if canvas.regions.iter().all(|r| r.class != ClassLabel::PavedArea || !r.rect.overlaps(&hedge)) {
                canvas.paint(ClassLabel::Vegetation, hedge);
            }
        }
    }

    // house, with a porch notch for the recessed modes
    let mode = p.door_mode;
    let (footprint, door_y) = match mode {
        DoorMode::Open => (vec![Rect::new(x0, yb, x1, yf)], yf),
        DoorMode::Recessed | DoorMode::Enclosed => {
            let dn = rng.random_range(1.4..2.0);
            let (nx0, nx1) = (door_x - NOTCH_HALF_WIDTH, door_x + NOTCH_HALF_WIDTH);
            let fp = vec![
                Rect::new(x0, yb, x1, yf - dn),
                Rect::new(x0, yf - dn, nx0, yf),
                Rect::new(nx1, yf - dn, x1, yf),
            ];
            canvas.paint(ClassLabel::PavedArea, Rect::new(nx0, yf - dn, nx1, yf));
            (fp, yf - dn)
        }
    };
    for r in &footprint {
        canvas.paint(ClassLabel::Roof, *r);
    }
    if mode == DoorMode::Enclosed {
        canvas.paint(
            ClassLabel::Fence,
            Rect::new(door_x - NOTCH_HALF_WIDTH - 0.1, yf, door_x + NOTCH_HALF_WIDTH + 0.1, yf + FENCE),
        );
    }
    let house_rect = Rect::new(x0, yb, x1, yf);

    // cars: one on the driveway, one at the kerb
    if rng.random_bool(dens) {
        let cy0 = rng.random_range(yf + 3.0..road_y0 - 5.1);
        let (cx0, cx1) = if rng.random_bool(0.5) {
            (dx0 + 0.2, dx0 + 2.1)
        } else {
            (dx1 - 2.1, dx1 - 0.2)
        };
        canvas.paint(ClassLabel::Car, Rect::new(cx0, cy0, cx1, cy0 + 4.6));
    }
    if rng.random_bool(0.5 * dens) {
        // never parked across the driveway mouth
        let kx = rng.random_range(lot_x0 + 2.5..lot_x1 - 2.5);
        if kx + 2.3 < dx0 - 0.5 || kx - 2.3 > dx1 + 0.5 {
            canvas.paint(ClassLabel::Car, Rect::new(kx - 2.3, road_y0 + 0.3, kx + 2.3, road_y0 + 2.2));
        }
    }

    // trees on lawn, kept away from the house so the footprint stays walkable
    let n_trees = (dens * rng.random_range(2.0..7.0)).round() as usize;
    let inner = lot.expanded(-0.8);
    for _ in 0..n_trees {
        for _ in 0..20 {
            let s = rng.random_range(1.5..3.0);
            let tx = rng.random_range(inner.min.x..inner.max.x - s);
            let ty = rng.random_range(inner.min.y..inner.max.y - s);
            let t = Rect::new(tx, ty, tx + s, ty + s);
            if house_rect.expanded(3.2).overlaps(&t) || !canvas.is_clear(&t.expanded(0.8)) {
                continue;
            }
            canvas.paint(ClassLabel::Tree, t);
            break;
        }
    }

    let house = House {
        footprint,
        center: house_rect.center(),
        front: Vec2::new(0.0, 1.0),
    };
    let door = Door {
        center: Vec2::new(door_x, door_y),
        width: DOOR_WIDTH,
        normal: Vec2::new(0.0, 1.0),
        mode,
    };

    let gps = if p.gps_offset_sigma > 0.0 {
        let n = Normal::new(0.0, p.gps_offset_sigma).expect("sigma validated");
        Vec2::new(n.sample(rng), n.sample(rng))
    } else {
        Vec2::ZERO
    };
    let start_altitude = uniform(rng, p.capture_altitude);
    let start_yaw = rng.random_range(-PI..PI);

    let world = WorldModel {
        seed: p.seed,
        bounds: Rect::new(0.0, 0.0, size, size),
        gps_start: house.center + gps,
        house,
        neighbors,
        door,
        lot,
        regions: canvas.regions,
        front_yard: Rect::new(lot_x0, cy, lot_x1, road_y0).into(),
        back_yard: Rect::new(lot_x0, back_y, lot_x1, cy).into(),
        front_paved: Rect::new(lot_x0, cy, lot_x1, road_y1).into(),
        start_altitude,
        start_yaw,
    };
    let k = rng.random_range(0..4u8);
    Some(rotate_world(world, k, Vec2::new(size / 2.0, size / 2.0)))
}

fn neighbor_plot(
    p: &GeneratorParams,
    rng: &mut ChaCha8Rng,
    side: f64,
    lot: Rect,
    yf: f64,
    road_y0: f64,
) -> Option<Plot> {
    let lw = rng.random_range(18.0..22.0);
    let nlot = if side < 0.0 {
        Rect::new(lot.min.x - lw, lot.min.y, lot.min.x, road_y0)
    } else {
        Rect::new(lot.max.x, lot.min.y, lot.max.x + lw, road_y0)
    };
    let w = uniform(rng, p.house_width);
    let d = uniform(rng, p.house_depth);
    let nyf = yf + rng.random_range(-1.5..1.5);
    let mut cx = nlot.center().x + rng.random_range(-1.0..1.0);
    // keep the house inside the world and at least 3 m from the shared fence
    if side < 0.0 {
        cx = cx.max(0.5 + w / 2.0).min(lot.min.x - 3.0 - w / 2.0);
    } else {
        cx = cx.min(p.world_size - 0.5 - w / 2.0).max(lot.max.x + 3.0 + w / 2.0);
    }
    let r = Rect::new(cx - w / 2.0, nyf - d, cx + w / 2.0, nyf);
    if r.min.x < 0.5 || r.max.x > p.world_size - 0.5 || r.min.y < 0.5 {
        return None;
    }
    Some(Plot {
        house: House {
            footprint: vec![r],
            center: r.center(),
            front: Vec2::new(0.0, 1.0),
        },
        lot: nlot,
        facade_y: nyf,
    })
}

fn paint_neighbor(canvas: &mut Canvas, rng: &mut ChaCha8Rng, plot: &Plot, road_y0: f64) {
    let r = plot.house.footprint[0];
    let l = plot.lot;
    canvas.paint(ClassLabel::Fence, Rect::new(l.min.x, l.min.y, l.max.x, l.min.y + FENCE));
    let dw = rng.random_range(3.0..4.0);
    let dx0 = if rng.random_bool(0.5) {
        r.min.x + 0.5
    } else {
        r.max.x - 0.5 - dw
    };
    canvas.paint(ClassLabel::PavedArea, Rect::new(dx0, plot.facade_y, dx0 + dw, road_y0));
    canvas.paint(ClassLabel::Roof, r);
    if rng.random_bool(0.5) {
        let s = rng.random_range(1.5..2.5);
        let tx = (r.center().x + rng.random_range(-3.0..3.0)).clamp(l.min.x + 1.0, l.max.x - 1.0 - s);
        let t = Rect::new(tx, l.min.y + 1.5, tx + s, l.min.y + 1.5 + s);
        if canvas.is_clear(&t.expanded(0.5)) {
            canvas.paint(ClassLabel::Tree, t);
        }
    }
}

fn rotate_world(mut w: WorldModel, k: u8, pivot: Vec2) -> WorldModel {
    if k % 4 == 0 {
        return w;
    }
    let pt = |p: Vec2| (p - pivot).rotate_quarter(k) + pivot;
    let rect = |r: Rect| r.rotate_quarter(k, pivot);
    let poly = |p: &Polygon| Polygon::new(p.vertices.iter().map(|&v| pt(v)).collect());
    let house = |h: &House| House {
        footprint: h.footprint.iter().map(|&r| rect(r)).collect(),
        center: pt(h.center),
        front: h.front.rotate_quarter(k),
    };
    w.house = house(&w.house);
    w.neighbors = w.neighbors.iter().map(house).collect();
    w.door.center = pt(w.door.center);
    w.door.normal = w.door.normal.rotate_quarter(k);
    w.lot = rect(w.lot);
    for r in &mut w.regions {
        r.rect = rect(r.rect);
    }
    w.front_yard = poly(&w.front_yard);
    w.back_yard = poly(&w.back_yard);
    w.front_paved = poly(&w.front_paved);
    w.gps_start = pt(w.gps_start);
    w
}

fn feasible(w: &WorldModel, p: &GeneratorParams) -> bool {
    use crate::descent::DeliveryTarget;
    let need = p.clearance + 0.5;
    let lot = w.lot;
    let step = 0.25;
    let has_spot = |target: DeliveryTarget| {
        let mut y = w.bounds.min.y;
        while y < w.bounds.max.y {
            let mut x = w.bounds.min.x;
            while x < w.bounds.max.x {
                let q = Vec2::new(x, y);
                if w.in_target_region(q, target) && w.obstacle_clearance(q) >= need {
                    return true;
                }
                x += step;
            }
            y += step;
        }
        false
    };
    let targets = [
        DeliveryTarget::FrontPavedArea,
        DeliveryTarget::FrontYard,
        DeliveryTarget::BackYard,
    ];
    if !targets.into_iter().all(has_spot) {
        return false;
    }
    if w.door.mode != DoorMode::Enclosed && w.obstacle_clearance(w.door.center + w.door.normal) < 0.7 {
        return false;
    }
    if w.door.mode == DoorMode::Open {
        let eye = w.door.center + w.door.normal * 0.05;
        let (mut seen, mut total) = (0usize, 0usize);
        // front-yard lattice points ahead of the door's wall plane
        let mut y = lot.min.y + step / 2.0;
        while y < lot.max.y {
            let mut x = lot.min.x + step / 2.0;
            while x < lot.max.x {
                let q = Vec2::new(x, y);
                x += step;
                let ahead = (q - w.door.center).dot(w.door.normal) > 0.0;
                if !ahead || !w.front_yard.contains(q) || w.obstacle_clearance(q) == 0.0 {
                    continue;
                }
                total += 1;
                seen += usize::from(w.line_of_sight(q, eye));
            }
            y += step;
        }
        if total == 0 || (seen as f64) < OPEN_DOOR_VISIBILITY * total as f64 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canvas_keeps_regions_disjoint() {
        let mut c = Canvas::default();
        c.paint(ClassLabel::PavedArea, Rect::new(0.0, 0.0, 10.0, 10.0));
        c.paint(ClassLabel::Car, Rect::new(2.0, 2.0, 4.0, 6.0));
        c.paint(ClassLabel::Roof, Rect::new(3.0, 0.0, 12.0, 3.0));
        for (i, a) in c.regions.iter().enumerate() {
            for b in &c.regions[i + 1..] {
                assert!(!a.rect.overlaps(&b.rect));
            }
        }
        let area: f64 = c.regions.iter().map(|r| r.rect.area()).sum();
        assert!((area - (100.0 + 6.0)).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = GeneratorParams {
            obstacle_density: 1.5,
            ..GeneratorParams::default()
        };
        assert!(matches!(generate_world(&p), Err(WorldError::InvalidParams(_))));
        let p = GeneratorParams {
            house_width: (12.0, 9.0),
            ..GeneratorParams::default()
        };
        assert!(generate_world(&p).is_err());
    }
}
