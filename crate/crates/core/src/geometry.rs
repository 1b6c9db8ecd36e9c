//! Planar geometry shared by the world model, sensors and planners.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Angle of the vector measured with `atan2(y, x)`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Rotation by a quarter turn, `k` times, in the `+x -> +y` sense.
    pub fn rotate_quarter(self, k: u8) -> Vec2 {
        match k % 4 {
            0 => self,
            1 => Vec2::new(-self.y, self.x),
            2 => Vec2::new(-self.x, -self.y),
            _ => Vec2::new(self.y, -self.x),
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
///
/// A raw difference of two `atan2` values lies in `(-2pi, 2pi]` and needs at
/// most one correction of `2pi`; anything further out is reduced first.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta;
    if !(-3.0 * PI..=3.0 * PI).contains(&t) {
        t = t.rem_euclid(two_pi);
    }
    if t > PI {
        t -= two_pi;
    } else if t <= -PI {
        t += two_pi;
    }
    t
}

/// Axis-aligned rectangle, `min` inclusive corner and `max` exclusive corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Vec2::new(x0.min(x1), y0.min(y1)),
            max: Vec2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x < self.max.x && p.y >= self.min.y && p.y < self.max.y
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            self.min.x - margin,
            self.min.y - margin,
            self.max.x + margin,
            self.max.y + margin,
        )
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            min: Vec2::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y)),
            max: Vec2::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y)),
        };
        (r.width() > 0.0 && r.height() > 0.0).then_some(r)
    }

    /// Parts of `self` not covered by `other`, as at most four disjoint rectangles.
    pub fn subtract(&self, other: &Rect) -> Vec<Rect> {
        let Some(cut) = self.intersection(other) else {
            return vec![*self];
        };
        let mut out = Vec::with_capacity(4);
        let mut push = |r: Rect| {
            if r.width() > 0.0 && r.height() > 0.0 {
                out.push(r);
            }
        };
        // full-width bands above and below the cut, then the side pieces
        push(Rect::new(self.min.x, self.min.y, self.max.x, cut.min.y));
        push(Rect::new(self.min.x, cut.max.y, self.max.x, self.max.y));
        push(Rect::new(self.min.x, cut.min.y, cut.min.x, cut.max.y));
        push(Rect::new(cut.max.x, cut.min.y, self.max.x, cut.max.y));
        out
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Image of the rectangle under a quarter-turn rotation about `pivot`.
    pub fn rotate_quarter(&self, k: u8, pivot: Vec2) -> Rect {
        let a = (self.min - pivot).rotate_quarter(k) + pivot;
        let b = (self.max - pivot).rotate_quarter(k) + pivot;
        Rect::new(a.x, a.y, b.x, b.y)
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }

    /// Whether the closed segment `a -> b` touches the open interior.
    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        // Liang-Barsky clipping against the open box.
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let checks = [
            (-d.x, a.x - self.min.x),
            (d.x, self.max.x - a.x),
            (-d.y, a.y - self.min.y),
            (d.y, self.max.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q <= 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        t0 < t1
    }
}

/// Simple polygon stored as a vertex ring (no repeated closing vertex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    /// Even-odd crossing test.
    pub fn contains(&self, p: Vec2) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Signed shoelace area (positive for counter-clockwise in a y-up frame).
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let v = &self.vertices;
        let n = v.len();
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let s = v.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
            return s * (1.0 / n.max(1) as f64);
        }
        let mut c = Vec2::ZERO;
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let w = p.cross(q);
            c = c + (p + q) * w;
        }
        c * (1.0 / (6.0 * a))
    }

    pub fn perimeter(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n).map(|i| v[i].distance(v[(i + 1) % n])).sum()
    }
}

impl From<Rect> for Polygon {
    fn from(r: Rect) -> Self {
        Polygon::new(r.corners().to_vec())
    }
}

/// Distance from `p` to the closed segment `a -> b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.distance(a + d * t)
}
