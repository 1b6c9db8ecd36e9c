//! Aerial descent: roof selection, orientation, descent region and safe spot.

mod camera;
mod clearance;
mod pipeline;
mod regions;

pub use camera::{backproject, CameraModel, CameraPoint};
pub use clearance::{clearance_map, find_safe_descent_point, CLEARANCE_EPS};
pub use pipeline::{estimate_house, run_descent, Capture, DescentConfig, DescentOutcome, DescentStatus, HouseEstimate};
pub use regions::{
    estimate_house_orientation, identify_recipient_roof, is_over_descent_region, motion_direction,
    pixel_in_region, region_centroid, select_descent_region, DeliveryTarget, DescentRegion,
};

use crate::semantics::SemanticsError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescentError {
    #[error("no roof segment visible in the aerial grid")]
    NoRoofVisible,
    #[error("no paved segment links the roof to the image border")]
    NoFrontPavedArea,
    #[error("drone already sits on the target point")]
    ZeroDisplacement,
    #[error("height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("no region pixel satisfies the clearance")]
    NoSafeSpot,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}
