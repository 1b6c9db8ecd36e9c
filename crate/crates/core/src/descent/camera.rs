//! Downward pinhole camera and ground-plane back-projection.

use super::DescentError;
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics of the downward-facing camera.
///
/// The camera is gimbal-stabilised: image columns run along world `+x` and
/// rows along world `+y`, so a ground offset `(U, V)` in the camera frame is
/// also the world offset from the drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub ox: f64,
    pub oy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraModel {
    /// 160x160 image with a 90 degree field of view: at 25 m the image covers 50 m.
    fn default() -> Self {
        Self::centered(160, 160, 80.0, 80.0)
    }
}

/// Point in the camera frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl CameraModel {
    /// Camera whose optical centre sits at `(W/2, H/2)`.
    pub fn centered(width: usize, height: usize, fx: f64, fy: f64) -> Self {
        Self {
            fx,
            fy,
            ox: width as f64 / 2.0,
            oy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), DescentError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(DescentError::InvalidCamera("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(DescentError::InvalidCamera("image must be non-empty".into()));
        }
        let inside = (0.0..=self.width as f64).contains(&self.ox)
            && (0.0..=self.height as f64).contains(&self.oy);
        if !inside {
            return Err(DescentError::InvalidCamera("optical centre outside image".into()));
        }
        Ok(())
    }

    pub fn optical_center(&self) -> Vec2 {
        Vec2::new(self.ox, self.oy)
    }

    /// Metres on the ground covered by one pixel step along columns and rows.
    pub fn ground_scale(&self, h: f64) -> (f64, f64) {
        (h / self.fx, h / self.fy)
    }

    /// Forward projection of a camera-frame point back to pixel coordinates.
    pub fn project(&self, p: CameraPoint) -> Vec2 {
        Vec2::new(self.fx * p.u / p.w + self.ox, self.fy * p.v / p.w + self.oy)
    }

    /// World point seen at `pixel` from a drone hovering at `drone` with height `h`.
    pub fn pixel_to_ground(&self, pixel: Vec2, drone: Vec2, h: f64) -> Result<Vec2, DescentError> {
        let p = backproject(pixel, self, h)?;
        Ok(drone + Vec2::new(p.u, p.v))
    }

    /// Pixel coordinates at which a ground point appears.
    pub fn ground_to_pixel(&self, ground: Vec2, drone: Vec2, h: f64) -> Vec2 {
        let d = ground - drone;
        self.project(CameraPoint { u: d.x, v: d.y, w: h })
    }
}

/// Map pixel `(u, v)` to the camera-frame point on the ground plane `h` below.
pub fn backproject(pixel: Vec2, cam: &CameraModel, h: f64) -> Result<CameraPoint, DescentError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DescentError::NonPositiveHeight(h));
    }
    Ok(CameraPoint {
        u: h * (pixel.x - cam.ox) / cam.fx,
        v: h * (pixel.y - cam.oy) / cam.fy,
        w: h,
    })
}
