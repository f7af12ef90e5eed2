//! Planar coordinates.
//!
//! Sibling offsets shrink like `r^n`; at `r ≈ 0.06` and `n = 15` they drop
//! below the unit roundoff of a coordinate of size `1/2`. Set points are
//! therefore stored as unevaluated sums `hi + lo` of two doubles, which keeps
//! every pairwise difference accurate to full double precision.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Error-free transformation: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Double-double scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add_f64(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    pub fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    /// `self - other`, rounded once to double precision.
    #[inline]
    pub fn diff(self, other: Dd) -> f64 {
        let (s, e) = two_sum(self.hi, -other.hi);
        s + (e + (self.lo - other.lo))
    }

    pub fn scale(self, k: f64) -> Dd {
        // exact for k a power of two, which is how averaging uses it
        Dd {
            hi: self.hi * k,
            lo: self.lo * k,
        }
    }
}

/// Plain double-precision vector, used for offsets and query points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// A set point in extended precision.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: Dd,
    pub y: Dd,
}

impl Point {
    pub const ORIGIN: Point = Point {
        x: Dd::ZERO,
        y: Dd::ZERO,
    };

    pub fn from_vec(v: Vec2) -> Point {
        Point {
            x: Dd::from_f64(v.x),
            y: Dd::from_f64(v.y),
        }
    }

    pub fn to_vec(self) -> Vec2 {
        Vec2::new(self.x.to_f64(), self.y.to_f64())
    }

    pub fn offset(self, v: Vec2) -> Point {
        Point {
            x: self.x.add_f64(v.x),
            y: self.y.add_f64(v.y),
        }
    }

    /// `self - other` in double precision.
    #[inline]
    pub fn diff(self, other: Point) -> Vec2 {
        Vec2::new(self.x.diff(other.x), self.y.diff(other.y))
    }

    /// `self - q` for a double-precision query point.
    #[inline]
    pub fn diff_vec(self, q: Vec2) -> Vec2 {
        self.diff(Point::from_vec(q))
    }

    pub fn distance(self, other: Point) -> f64 {
        self.diff(other).norm()
    }
}
