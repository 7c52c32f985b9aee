//! Small 3D vector type and the orthonormal frame carried by the wire tip.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in millimetres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Point3 = Point3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Point3 = Point3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Point3 = Point3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction. Returns `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `self + (other - self) * t`
    pub fn lerp(self, other: Point3, t: f64) -> Point3 {
        self + (other - self) * t
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Orthonormal (tangent, normal, binormal) triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tangent: Point3,
    pub normal: Point3,
    pub binormal: Point3,
}

impl Frame {
    /// Canonical frame for a tangent: `normal = t × x̂` (falling back to `t × ŷ`
    /// when the tangent is along x), `binormal = t × normal`.
    pub fn from_tangent(tangent: Point3) -> Frame {
        let t = tangent.normalized().unwrap_or(Point3::Z);
        let c = t.cross(Point3::X);
        let normal = if c.norm() > 1e-6 {
            c / c.norm()
        } else {
            let c = t.cross(Point3::Y);
            c / c.norm()
        };
        Frame {
            tangent: t,
            normal,
            binormal: t.cross(normal),
        }
    }

    /// Rotation-minimizing transport onto a new tangent direction: the frame is
    /// rotated by the smallest rotation taking the old tangent onto the new one.
    pub fn transport(&self, new_tangent: Point3) -> Frame {
        let t1 = self.tangent;
        let Some(t2) = new_tangent.normalized() else {
            return *self;
        };
        let axis = t1.cross(t2);
        let sin = axis.norm();
        let cos = t1.dot(t2);
        let rotated = if sin < 1e-12 {
            if cos > 0.0 {
                *self
            } else {
                // Full reversal: rotate by pi about the normal.
                Frame {
                    tangent: t2,
                    normal: self.normal,
                    binormal: -self.binormal,
                }
            }
        } else {
            let k = axis / sin;
            let rot = |v: Point3| v * cos + k.cross(v) * sin + k * (k.dot(v) * (1.0 - cos));
            Frame {
                tangent: t2,
                normal: rot(self.normal),
                binormal: rot(self.binormal),
            }
        };
        rotated.orthonormalized()
    }

    /// Gram-Schmidt with the tangent held fixed.
    pub fn orthonormalized(&self) -> Frame {
        let t = self.tangent.normalized().unwrap_or(Point3::Z);
        let n = self.normal - t * t.dot(self.normal);
        let n = n.normalized().unwrap_or_else(|| Frame::from_tangent(t).normal);
        Frame {
            tangent: t,
            normal: n,
            binormal: t.cross(n),
        }
    }

    /// Largest deviation from orthonormality over all pairwise dot products.
    pub fn orthonormality_error(&self) -> f64 {
        let v = [self.tangent, self.normal, self.binormal];
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v[i].dot(v[j]) - target).abs());
            }
        }
        err
    }
}
