//! Yarn cross sections: 10 ordered contour keypoints plus a center keypoint.

use serde::{Deserialize, Serialize};

use super::polygon::{is_simple, signed_area};
use super::{is_finite3, Point2, Point3, Vector3};
use crate::{Error, Result};

/// Number of contour keypoints per section.
pub const KEYPOINTS: usize = 10;

/// Dense sampling used when building an elliptical section.
const ELLIPSE_DENSE: usize = 4096;

/// Tolerances for section invariants, in model length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub plane: f64,
    pub centroid: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            plane: 0.5,
            centroid: 0.25,
        }
    }
}

/// Orthonormal in-plane frame of a section.
///
/// `e1` is the global X axis projected into the plane, or the global Y axis
/// when the normal is within 60° of X. `e2 = normal × e1`, so counter-clockwise
/// order in (e1, e2) is counter-clockwise about the normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionFrame {
    pub origin: Point3,
    pub normal: Vector3,
    pub e1: Vector3,
    pub e2: Vector3,
}

impl SectionFrame {
    pub fn canonical(origin: Point3, normal: Vector3) -> Result<Self> {
        let len = normal.norm();
        if !(len > 1e-12) || !len.is_finite() {
            return Err(Error::Domain("section normal must be non-zero".into()));
        }
        let n = normal / len;
        let reference = if n.x.abs() < 0.5 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = (reference - n * reference.dot(&n)).normalize();
        let e2 = n.cross(&e1);
        Ok(Self {
            origin,
            normal: n,
            e1,
            e2,
        })
    }

    pub fn to_local(&self, p: &Point3) -> Point2 {
        let d = p - self.origin;
        Point2::new(d.dot(&self.e1), d.dot(&self.e2))
    }

    pub fn to_world(&self, q: &Point2) -> Point3 {
        self.origin + self.e1 * q.x + self.e2 * q.y
    }
}

/// Planar cut of a yarn: contour keypoints in cyclic order, the center
/// keypoint, and the arc-length station along the owning yarn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub contour: [Point3; KEYPOINTS],
    pub center: Point3,
    pub station: f64,
}

impl CrossSection {
    /// Section whose center is the vertex centroid of `contour`.
    pub fn from_contour(contour: [Point3; KEYPOINTS], station: f64) -> Self {
        let center = vertex_centroid(&contour);
        Self {
            contour,
            center,
            station,
        }
    }

    pub fn vertex_centroid(&self) -> Point3 {
        vertex_centroid(&self.contour)
    }

    /// Newell normal; its length is twice the polygon area for planar rings.
    pub fn newell_normal(&self) -> Vector3 {
        let mut n = Vector3::zeros();
        for i in 0..KEYPOINTS {
            let (a, b) = (self.contour[i], self.contour[(i + 1) % KEYPOINTS]);
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        n
    }

    /// Best-fit plane frame through the contour centroid.
    pub fn frame(&self) -> Result<SectionFrame> {
        let n = self.newell_normal();
        if n.norm() <= 1e-12 {
            return Err(Error::DegenerateGeometry(
                "section contour has no area".into(),
            ));
        }
        SectionFrame::canonical(self.vertex_centroid(), n)
    }

    /// Contour expressed in the section frame.
    pub fn local_ring(&self) -> Result<Vec<Point2>> {
        let f = self.frame()?;
        Ok(self.contour.iter().map(|p| f.to_local(p)).collect())
    }

    /// Largest distance of a contour point from the best-fit plane.
    pub fn planarity_error(&self) -> Result<f64> {
        let f = self.frame()?;
        Ok(self
            .contour
            .iter()
            .map(|p| (p - f.origin).dot(&f.normal).abs())
            .fold(0.0, f64::max))
    }

    pub fn area(&self) -> Result<f64> {
        section_area(self)
    }

    pub fn translated(&self, v: &Vector3) -> Self {
        Self {
            contour: self.contour.map(|p| p + v),
            center: self.center + v,
            station: self.station,
        }
    }

    /// Check every section invariant.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if !self.contour.iter().all(is_finite3) || !is_finite3(&self.center) {
            return Err(Error::InvalidContour("non-finite keypoint".into()));
        }
        let plane = self.planarity_error()?;
        if plane > tol.plane {
            return Err(Error::InvalidContour(format!(
                "contour deviates {plane:.3} from its plane (tolerance {})",
                tol.plane
            )));
        }
        let off = (self.vertex_centroid() - self.center).norm();
        if off > tol.centroid {
            return Err(Error::InvalidContour(format!(
                "center is {off:.3} from the contour centroid (tolerance {})",
                tol.centroid
            )));
        }
        if !is_simple(&self.local_ring()?) {
            return Err(Error::InvalidContour("contour self-intersects".into()));
        }
        Ok(())
    }

    /// Project every contour point onto the best-fit plane.
    pub fn projected_to_plane(&self) -> Result<Self> {
        let f = self.frame()?;
        let contour = self
            .contour
            .map(|p| p - f.normal * (p - f.origin).dot(&f.normal));
        Ok(Self {
            contour,
            center: self.center,
            station: self.station,
        })
    }
}

pub(crate) fn vertex_centroid(pts: &[Point3]) -> Point3 {
    let sum = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / pts.len() as f64)
}

/// Shoelace area of the 10-gon in its best-fit plane.
pub fn section_area(section: &CrossSection) -> Result<f64> {
    let ring = section.local_ring()?;
    if !is_simple(&ring) {
        return Err(Error::InvalidContour("contour self-intersects".into()));
    }
    let area = signed_area(&ring).abs();
    if !(area > 0.0) {
        return Err(Error::DegenerateGeometry("section has zero area".into()));
    }
    Ok(area)
}

/// Elliptical section: 10 keypoints at equal arc-length spacing on the
/// ellipse, canonical start and orientation. `orientation` is the angle of
/// the `a` semi-axis from the frame's `e1` axis, towards `e2`.
pub fn ellipse_section(
    center: Point3,
    normal: Vector3,
    a: f64,
    b: f64,
    orientation: f64,
) -> Result<CrossSection> {
    ellipse_section_with_resolution(center, normal, a, b, orientation, ELLIPSE_DENSE)
}

/// [`ellipse_section`] with an explicit dense pre-sampling resolution.
pub fn ellipse_section_with_resolution(
    center: Point3,
    normal: Vector3,
    a: f64,
    b: f64,
    orientation: f64,
    dense: usize,
) -> Result<CrossSection> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "ellipse semi-axes must be positive, got {a}, {b}"
        )));
    }
    if dense < KEYPOINTS {
        return Err(Error::Domain(format!(
            "dense resolution {dense} below {KEYPOINTS}"
        )));
    }
    let frame = SectionFrame::canonical(center, normal)?;
    let (s, c) = orientation.sin_cos();
    let at = |t: f64| {
        let (x, y) = (a * t.cos(), b * t.sin());
        Point2::new(c * x - s * y, s * x + c * y)
    };
    // parameter of maximum e1 coordinate; keypoints then follow increasing
    // parameter, which is counter-clockwise in the frame
    let t0 = (-s * b).atan2(c * a);
    let mut cum = Vec::with_capacity(dense + 1);
    cum.push(0.0);
    let mut prev = at(t0);
    for i in 1..=dense {
        let q = at(t0 + std::f64::consts::TAU * i as f64 / dense as f64);
        cum.push(cum[i - 1] + (q - prev).norm());
        prev = q;
    }
    let total = cum[dense];
    let keys: Vec<Point2> = (0..KEYPOINTS)
        .map(|k| {
            let target = total * k as f64 / KEYPOINTS as f64;
            let i = cum
                .partition_point(|&v| v <= target)
                .saturating_sub(1)
                .min(dense - 1);
            let f = (target - cum[i]) / (cum[i + 1] - cum[i]);
            at(t0 + std::f64::consts::TAU * (i as f64 + f) / dense as f64)
        })
        .collect();
    let mut contour = [center; KEYPOINTS];
    for (dst, q) in contour.iter_mut().zip(keys.iter()) {
        *dst = frame.to_world(q);
    }
    Ok(CrossSection {
        contour,
        center,
        station: 0.0,
    })
}

/// Cyclic offset `k` minimising the summed length of the edges
/// `a[i] -> b[(i + k) % 10]`. Ties go to the smallest offset.
pub fn min_twist_offset(a: &[Point3; KEYPOINTS], b: &[Point3; KEYPOINTS]) -> usize {
    let cost = |k: usize| -> f64 {
        (0..KEYPOINTS)
            .map(|i| (b[(i + k) % KEYPOINTS] - a[i]).norm())
            .sum()
    };
    let mut best = (0, cost(0));
    for k in 1..KEYPOINTS {
        let c = cost(k);
        if c < best.1 - 1e-12 * best.1.max(1.0) {
            best = (k, c);
        }
    }
    best.0
}
