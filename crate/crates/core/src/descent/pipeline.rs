//! End-to-end descent: capture, infer the house layout, move over the descent
//! region, pick a clearance-safe spot and lower to hover (or landing) height.

use super::camera::CameraModel;
use super::clearance::find_safe_descent_point;
use super::regions::{
    estimate_house_orientation, identify_recipient_roof, is_over_descent_region, motion_direction,
    region_centroid, select_descent_region, DeliveryTarget, DescentRegion,
};
use super::DescentError;
use crate::geometry::Vec2;
use crate::occupancy::{build_occupancy, OccupancyGrid};
use crate::semantics::{
    apply_label_noise, classify_grass_front_back, connected_components, yard_side, ClassLabel,
    FrontBackMask, LabelNoiseModel, Segment, SemanticGrid, YardLabel,
};
use crate::simworld::{range_find, render_aerial, render_nadir, DronePose, Flight, TimedPose, VelocityCommand, WorldModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    /// Minimum distance from the descent point to any roof or obstacle, metres.
    pub clearance: f64,
    pub hover_height: f64,
    /// Seconds between full re-captures while moving (only used with noise).
    pub perception_interval: f64,
    /// Abort once the flight clock passes this many seconds.
    pub time_cap: f64,
    /// A chosen roof whose centroid lands farther than this from the
    /// recipient's footprint counts as the wrong house.
    pub wrong_roof_margin: f64,
    pub noise: Option<LabelNoiseModel>,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            clearance: 2.5,
            hover_height: 2.0,
            perception_interval: 0.5,
            time_cap: 300.0,
            wrong_roof_margin: 1.0,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Success,
    NoRoofVisible,
    NoFrontPavedArea,
    NoSafeSpot,
    WrongRoof,
    Timeout,
}

/// What the drone inferred about the house from one aerial capture.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseEstimate {
    pub roof: Segment,
    /// Front direction in image (and world) axes, roof towards paved area.
    pub v_front: Vec2,
    pub c_roof_world: Vec2,
    pub mask: FrontBackMask,
}

/// Roof selection, house orientation and front/back yard split for a capture
/// taken at `pose`.
pub fn estimate_house(grid: &SemanticGrid, cam: &CameraModel, pose: &DronePose) -> Result<HouseEstimate, DescentError> {
    let roofs = connected_components(grid, ClassLabel::Roof);
    let roof = identify_recipient_roof(&roofs, grid.drone_pixel())?.clone();
    let paved = connected_components(grid, ClassLabel::PavedArea);
    let v_front = estimate_house_orientation(&roof, &paved)?;
    let mask = classify_grass_front_back(grid, roof.centroid, v_front)?;
    let c_roof_world = cam.pixel_to_ground(roof.centroid, pose.position(), pose.altitude)?;
    Ok(HouseEstimate {
        roof,
        v_front,
        c_roof_world,
        mask,
    })
}

/// Aerial capture used for the safe-spot search, kept for the occupancy map.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub grid: SemanticGrid,
    pub pose: DronePose,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub status: DescentStatus,
    pub region: DescentRegion,
    pub descent_point: Option<Vec2>,
    pub final_altitude: f64,
    pub trajectory: Vec<TimedPose>,
    pub house: Option<HouseEstimate>,
    pub capture: Option<Capture>,
    /// Roof segment re-identified in `capture`.
    pub capture_roof: Option<Segment>,
    pub occupancy: Option<OccupancyGrid>,
}

struct Camera<'a> {
    world: &'a WorldModel,
    cam: &'a CameraModel,
    noise: Option<&'a LabelNoiseModel>,
    shots: u64,
}

impl Camera<'_> {
    fn capture(&mut self, pose: &DronePose) -> Result<SemanticGrid, DescentError> {
        let clean = render_aerial(self.world, pose, self.cam)
            .map_err(|_| DescentError::NonPositiveHeight(pose.altitude))?;
        self.shots += 1;
        match self.noise {
            None => Ok(clean),
            Some(m) => Ok(apply_label_noise(&clean, &m.with_seed(m.seed.wrapping_add(self.shots)))?),
        }
    }
}

/// Run the descent for `target` starting from the flight's current pose.
///
/// The house estimate from the first capture is kept in world coordinates, so
/// later captures re-project the roof centroid instead of re-selecting it.
pub fn run_descent(
    flight: &mut Flight,
    world: &WorldModel,
    target: DeliveryTarget,
    cam: &CameraModel,
    cfg: &DescentConfig,
) -> DescentOutcome {
    let region = select_descent_region(target);
    let mut out = DescentOutcome {
        status: DescentStatus::Success,
        region,
        descent_point: None,
        final_altitude: flight.pose().altitude,
        trajectory: Vec::new(),
        house: None,
        capture: None,
        capture_roof: None,
        occupancy: None,
    };
    let status = descend_inner(flight, world, target, cam, cfg, &mut out);
    out.status = status;
    out.final_altitude = flight.pose().altitude;
    out.trajectory = flight.trajectory().to_vec();
    out
}

fn status_of(e: DescentError) -> DescentStatus {
    match e {
        DescentError::NoRoofVisible => DescentStatus::NoRoofVisible,
        DescentError::NoFrontPavedArea => DescentStatus::NoFrontPavedArea,
        _ => DescentStatus::NoSafeSpot,
    }
}

fn descend_inner(
    flight: &mut Flight,
    world: &WorldModel,
    target: DeliveryTarget,
    cam: &CameraModel,
    cfg: &DescentConfig,
    out: &mut DescentOutcome,
) -> DescentStatus {
    let region = out.region;
    let mut camera = Camera {
        world,
        cam,
        noise: cfg.noise.as_ref(),
        shots: 0,
    };
    // the first capture is taken while hovering for one control step
    flight.step(&VelocityCommand::default());
    let pose0 = flight.pose();
    let h = range_find(world, &pose0);
    let grid0 = match camera.capture(&pose0) {
        Ok(g) => g,
        Err(e) => return status_of(e),
    };
    let house = match estimate_house(&grid0, cam, &pose0) {
        Ok(est) => est,
        Err(e) => return status_of(e),
    };
    let wrong_roof = !world.is_recipient_roof(house.c_roof_world, cfg.wrong_roof_margin);
    let c_roof_world = house.c_roof_world;
    let v_front = house.v_front;
    let Some(c_descend_px) = region_centroid(&grid0, &house.mask, region) else {
        out.house = Some(house);
        return DescentStatus::NoSafeSpot;
    };
    out.house = Some(house);
    let c_descend = match cam.pixel_to_ground(c_descend_px, pose0.position(), h) {
        Ok(p) => p,
        Err(e) => return status_of(e),
    };

    // lateral motion at capture height until the ground below is the region
    let over = |pose: &DronePose, camera: &mut Camera, tick: bool| -> Result<Option<bool>, DescentError> {
        if cfg.noise.is_none() {
            let class = render_nadir(world, pose);
            return Ok(Some(match region {
                DescentRegion::FrontPavedArea => class == ClassLabel::PavedArea,
                DescentRegion::FrontYard => {
                    class == ClassLabel::Grass && yard_side(pose.position(), c_roof_world, v_front) == YardLabel::Front
                }
                DescentRegion::BackYard => {
                    class == ClassLabel::Grass && yard_side(pose.position(), c_roof_world, v_front) == YardLabel::Back
                }
            }));
        }
        if !tick {
            return Ok(None);
        }
        let g = camera.capture(pose)?;
        let c = cam.ground_to_pixel(c_roof_world, pose.position(), pose.altitude);
        let m = classify_grass_front_back(&g, c, v_front)?;
        Ok(Some(is_over_descent_region(&g, &m, region)))
    };
    let per_tick = ((cfg.perception_interval / flight.dt).round() as u64).max(1);
    let already_over = matches!(over(&flight.pose(), &mut camera, true), Ok(Some(true)));
    if !already_over {
        let dir = match motion_direction(pose0.position(), c_descend) {
            Ok(d) => d,
            Err(_) => return DescentStatus::NoSafeSpot,
        };
        let goal = pose0.position() + dir * pose0.position().distance(c_descend);
        loop {
            if flight.time() >= cfg.time_cap {
                return DescentStatus::Timeout;
            }
            let reached = flight.step_toward(goal, h, None);
            let tick = flight.ticks() % per_tick == 0;
            match over(&flight.pose(), &mut camera, tick) {
                Ok(Some(true)) => break,
                Ok(_) => {}
                Err(e) => return status_of(e),
            }
            if reached {
                break;
            }
        }
    }

    // safe-spot search on a fresh capture
    let pose1 = flight.pose();
    let grid1 = match camera.capture(&pose1) {
        Ok(g) => g,
        Err(e) => return status_of(e),
    };
    let c_roof_px = cam.ground_to_pixel(c_roof_world, pose1.position(), h);
    let mask1 = match classify_grass_front_back(&grid1, c_roof_px, v_front) {
        Ok(m) => m,
        Err(e) => return status_of(e.into()),
    };
    let spot_px = match find_safe_descent_point(&grid1, &mask1, region, cam, h, cfg.clearance) {
        Ok(p) => p,
        Err(e) => return status_of(e),
    };
    let spot = match cam.pixel_to_ground(spot_px.as_point(), pose1.position(), h) {
        Ok(p) => p,
        Err(e) => return status_of(e),
    };
    out.descent_point = Some(spot);
    let roofs1 = connected_components(&grid1, ClassLabel::Roof);
    out.capture_roof = identify_recipient_roof(&roofs1, c_roof_px).ok().cloned();
    out.occupancy = build_occupancy(&grid1, cam, &pose1).ok();
    out.capture = Some(Capture { grid: grid1, pose: pose1 });

    while !flight.step_toward(spot, h, None) {
        if flight.time() >= cfg.time_cap {
            return DescentStatus::Timeout;
        }
    }
    // lower while turning to face the house; yards are landed on directly
    let final_alt = match target {
        DeliveryTarget::FrontDoor | DeliveryTarget::FrontPavedArea => cfg.hover_height,
        DeliveryTarget::BackYard | DeliveryTarget::FrontYard => 0.0,
    };
    let face = (c_roof_world - spot).normalized().map(|d| d.angle());
    while !flight.step_toward(spot, final_alt, face) {
        if flight.time() >= cfg.time_cap {
            return DescentStatus::Timeout;
        }
    }
    if wrong_roof {
        DescentStatus::WrongRoof
    } else {
        DescentStatus::Success
    }
}
