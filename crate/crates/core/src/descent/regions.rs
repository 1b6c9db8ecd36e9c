//! Roof selection, house orientation and descent-region logic on the aerial grid.

use super::DescentError;
use crate::geometry::Vec2;
use crate::semantics::{ClassLabel, FrontBackMask, Pixel, Segment, SemanticGrid, YardLabel};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Where the recipient wants the package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryTarget {
    FrontDoor,
    FrontPavedArea,
    BackYard,
    FrontYard,
}

impl DeliveryTarget {
    pub const ALL: [DeliveryTarget; 4] = [
        DeliveryTarget::FrontDoor,
        DeliveryTarget::FrontPavedArea,
        DeliveryTarget::BackYard,
        DeliveryTarget::FrontYard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeliveryTarget::FrontDoor => "front_door",
            DeliveryTarget::FrontPavedArea => "front_paved_area",
            DeliveryTarget::BackYard => "back_yard",
            DeliveryTarget::FrontYard => "front_yard",
        }
    }
}

impl std::str::FromStr for DeliveryTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeliveryTarget::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown delivery target `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentRegion {
    FrontPavedArea,
    BackYard,
    FrontYard,
}

/// Descend on the paved area for door and paved deliveries, in the matching
/// yard otherwise.
pub fn select_descent_region(target: DeliveryTarget) -> DescentRegion {
    match target {
        DeliveryTarget::FrontDoor | DeliveryTarget::FrontPavedArea => DescentRegion::FrontPavedArea,
        DeliveryTarget::BackYard => DescentRegion::BackYard,
        DeliveryTarget::FrontYard => DescentRegion::FrontYard,
    }
}

/// The roof whose centroid is closest to the drone's image position.
///
/// Ties keep the earlier segment.
pub fn identify_recipient_roof(roofs: &[Segment], p_drone: Vec2) -> Result<&Segment, DescentError> {
    let mut best: Option<(&Segment, f64)> = None;
    for seg in roofs {
        let d = seg.centroid.distance(p_drone);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((seg, d));
        }
    }
    best.map(|(s, _)| s).ok_or(DescentError::NoRoofVisible)
}

/// Unit-free front direction of the house, pointing from the roof centroid
/// towards the centroid of the paved segment that leads to the road.
///
/// A paved segment qualifies when it has a pixel 8-adjacent to the roof and it
/// reaches the image border; among several, the largest wins.
pub fn estimate_house_orientation(roof: &Segment, paved: &[Segment]) -> Result<Vec2, DescentError> {
    let roof_pixels: HashSet<Pixel> = roof.pixels.iter().copied().collect();
    let touches_roof = |seg: &Segment| {
        seg.pixels.iter().any(|p| {
            (-1i64..=1).any(|dy| {
                (-1i64..=1).any(|dx| {
                    let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                    x >= 0 && y >= 0 && roof_pixels.contains(&Pixel::new(x as usize, y as usize))
                })
            })
        })
    };
    let mut best: Option<&Segment> = None;
    for seg in paved {
        if seg.touches_image_boundary
            && touches_roof(seg)
            && best.is_none_or(|b| seg.area() > b.area())
        {
            best = Some(seg);
        }
    }
    let paved = best.ok_or(DescentError::NoFrontPavedArea)?;
    let v = paved.centroid - roof.centroid;
    if v.normalized().is_none() {
        return Err(DescentError::NoFrontPavedArea);
    }
    Ok(v)
}

/// Unit vector from the drone towards the descent-region centroid.
pub fn motion_direction(p_drone: Vec2, c_descend: Vec2) -> Result<Vec2, DescentError> {
    (c_descend - p_drone)
        .normalized()
        .ok_or(DescentError::ZeroDisplacement)
}

/// Whether pixel `p` belongs to the descent region.
pub fn pixel_in_region(
    grid: &SemanticGrid,
    mask: &FrontBackMask,
    p: Pixel,
    region: DescentRegion,
) -> bool {
    match region {
        DescentRegion::FrontPavedArea => grid.get(p) == ClassLabel::PavedArea,
        DescentRegion::FrontYard => mask.get(p) == YardLabel::Front,
        DescentRegion::BackYard => mask.get(p) == YardLabel::Back,
    }
}

/// True when the pixel under the drone is labelled as the descent region.
pub fn is_over_descent_region(grid: &SemanticGrid, mask: &FrontBackMask, region: DescentRegion) -> bool {
    pixel_in_region(grid, mask, grid.center_pixel(), region)
}

/// Centroid of all region pixels in the image, `None` when the region is absent.
pub fn region_centroid(grid: &SemanticGrid, mask: &FrontBackMask, region: DescentRegion) -> Option<Vec2> {
    let (mut sum, mut n) = (Vec2::ZERO, 0usize);
    for p in grid.pixels() {
        if pixel_in_region(grid, mask, p, region) {
            sum = sum + p.as_point();
            n += 1;
        }
    }
    (n > 0).then(|| sum * (1.0 / n as f64))
}
