//! First-order drone kinematics and a recorded flight.

use super::DronePose;
use crate::geometry::{normalize_angle, Vec2};
use serde::{Deserialize, Serialize};

/// Speed limit used by every experiment.
pub const MAX_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub velocity: Vec2,
    pub climb: f64,
    pub yaw_rate: f64,
}

/// Advance `pose` by `dt` with the commanded velocity, its 3D speed capped at
/// 0.5 m/s.
pub fn step_drone(pose: &DronePose, cmd: &VelocityCommand, dt: f64) -> DronePose {
    step_drone_limited(pose, cmd, dt, MAX_SPEED)
}

pub fn step_drone_limited(pose: &DronePose, cmd: &VelocityCommand, dt: f64, max_speed: f64) -> DronePose {
    assert!(dt > 0.0, "time step must be positive");
    let (mut v, mut vz) = (cmd.velocity, cmd.climb);
    let speed = (v.dot(v) + vz * vz).sqrt();
    if speed > max_speed {
        let k = max_speed / speed;
        v = v * k;
        vz *= k;
    }
    DronePose {
        x: pose.x + v.x * dt,
        y: pose.y + v.y * dt,
        altitude: (pose.altitude + vz * dt).max(0.0),
        yaw: normalize_angle(pose.yaw + cmd.yaw_rate * dt),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: DronePose,
}

/// A drone flying on a fixed control clock, with its full trajectory.
#[derive(Debug, Clone)]
pub struct Flight {
    pose: DronePose,
    tick: u64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    trajectory: Vec<TimedPose>,
}

impl Flight {
    pub fn new(pose: DronePose, dt: f64, max_speed: f64, max_yaw_rate: f64) -> Self {
        Self {
            pose,
            tick: 0,
            dt,
            max_speed,
            max_yaw_rate,
            trajectory: vec![TimedPose { t: 0.0, pose }],
        }
    }

    pub fn pose(&self) -> DronePose {
        self.pose
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    /// Simulated seconds since the flight started.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn trajectory(&self) -> &[TimedPose] {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Vec<TimedPose> {
        self.trajectory
    }

    /// Horizontal plus vertical distance flown.
    pub fn path_length(&self) -> f64 {
        path_length(&self.trajectory)
    }

    pub fn step(&mut self, cmd: &VelocityCommand) {
        let yaw_rate = cmd.yaw_rate.clamp(-self.max_yaw_rate, self.max_yaw_rate);
        let cmd = VelocityCommand { yaw_rate, ..*cmd };
        self.pose = step_drone_limited(&self.pose, &cmd, self.dt, self.max_speed);
        self.tick += 1;
        self.trajectory.push(TimedPose {
            t: self.time(),
            pose: self.pose,
        });
    }

    /// One control step towards `(target, altitude)` while turning to `yaw`.
    /// Returns true once both position and yaw have been reached.
    pub fn step_toward(&mut self, target: Vec2, altitude: f64, yaw: Option<f64>) -> bool {
        if self.at(target, altitude, yaw) {
            return true;
        }
        let d = target - self.pose.position();
        let dz = altitude - self.pose.altitude;
        let yaw_rate = yaw.map_or(0.0, |y| normalize_angle(y - self.pose.yaw) / self.dt);
        self.step(&VelocityCommand {
            velocity: d * (1.0 / self.dt),
            climb: dz / self.dt,
            yaw_rate,
        });
        self.at(target, altitude, yaw)
    }

    fn at(&self, target: Vec2, altitude: f64, yaw: Option<f64>) -> bool {
        let p = self.pose;
        let pos_ok = p.position().distance(target) < 1e-6 && (p.altitude - altitude).abs() < 1e-6;
        let yaw_ok = yaw.is_none_or(|y| normalize_angle(y - p.yaw).abs() < 1e-9);
        pos_ok && yaw_ok
    }
}

/// Length of the polyline through the recorded positions, in 3D.
pub fn path_length(traj: &[TimedPose]) -> f64 {
    traj.windows(2)
        .map(|w| {
            let (a, b) = (w[0].pose, w[1].pose);
            let d = b.position() - a.position();
            let dz = b.altitude - a.altitude;
            (d.dot(d) + dz * dz).sqrt()
        })
        .sum()
}
