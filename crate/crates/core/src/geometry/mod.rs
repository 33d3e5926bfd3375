//! Curve, polygon and cross-section mathematics shared by every stage.
//!
//! Coordinates are in model length units; a model carries the physical size
//! of one unit (20 µm by default), so one unit is one voxel at the nominal
//! resolution. X runs along the warp, Y along the weft and Z through the
//! thickness.

mod bspline;
mod polygon;
mod section;

pub use bspline::{bspline_fit, bspline_fit_with, BSplineCurve, FitOptions};
pub use polygon::{
    canonical_resample_closed, canonicalize_ring, is_simple, polygon_centroid, resample_closed,
    signed_area,
};
pub use section::{
    ellipse_section, ellipse_section_with_resolution, min_twist_offset, section_area, CrossSection,
    SectionFrame, Tolerances, KEYPOINTS,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Point2 = nalgebra::Point2<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Vector2 = nalgebra::Vector2<f64>;

/// Default B-spline degree for yarn paths.
pub const DEFAULT_DEGREE: usize = 3;

pub(crate) fn is_finite3(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Ordered open sequence of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point3>", into = "Vec<Point3>")]
pub struct Polyline {
    points: Vec<Point3>,
}

impl TryFrom<Vec<Point3>> for Polyline {
    type Error = Error;
    fn try_from(points: Vec<Point3>) -> Result<Self> {
        Polyline::new(points)
    }
}

impl From<Polyline> for Vec<Point3> {
    fn from(p: Polyline) -> Self {
        p.points
    }
}

impl Polyline {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData(
                "polyline needs at least one point".into(),
            ));
        }
        if !points.iter().all(is_finite3) {
            return Err(Error::Domain("polyline coordinates must be finite".into()));
        }
        if points.len() >= 2 && points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateGeometry(
                "polyline has two consecutive identical points".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Like [`Polyline::new`] but drops consecutive duplicates first.
    pub fn new_dedup(mut points: Vec<Point3>) -> Result<Self> {
        points.dedup();
        Self::new(points)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// `n` points at equal arc-length spacing, both endpoints included.
    pub fn resample(&self, n: usize) -> Result<Polyline> {
        resample_arclength(&self.points, n).and_then(Polyline::new)
    }

    pub fn translated(&self, v: &Vector3) -> Polyline {
        Polyline {
            points: self.points.iter().map(|p| p + v).collect(),
        }
    }
}

/// Equal arc-length resampling of an open point sequence.
///
/// Consecutive duplicates are tolerated in the input; a sequence with zero
/// total length is degenerate.
pub fn resample_arclength(points: &[Point3], n: usize) -> Result<Vec<Point3>> {
    if n < 2 {
        return Err(Error::Domain(format!("resample count {n} < 2")));
    }
    let mut cum = Vec::with_capacity(points.len());
    let mut total = 0.0;
    cum.push(0.0);
    for w in points.windows(2) {
        total += (w[1] - w[0]).norm();
        cum.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateGeometry(
            "cannot resample a zero-length polyline".into(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        if i == n - 1 {
            out.push(points[points.len() - 1]);
            break;
        }
        let s = total * i as f64 / (n - 1) as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let f = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let (a, b) = (points[seg], points[seg + 1]);
        out.push(a + (b - a) * f);
    }
    Ok(out)
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}
